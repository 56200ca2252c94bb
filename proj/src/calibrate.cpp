#include <cmath>
#include <ostream>

#include "hetsim/config.h"
#include "hetsim/runner.h"

namespace hetsim {

namespace {

// Calibration targets for the shipped defaults.  The DMA setup overhead is
// the one free parameter; everything else is fixed by the cluster specs.
constexpr double gemv_ratio_target = 2.5;  // decode streaming advantage, mc over cc
constexpr double gemm_ratio_min = 3.0, gemm_ratio_max = 6.0;
constexpr double gemv_ratio_min = 1.8, gemv_ratio_max = 3.2;
constexpr uint64_t balance_len_min = 20, balance_len_max = 60;
constexpr uint64_t overhead_step = 1024, overhead_steps = 64;

}  // namespace

int cmd_calibrate(const std::string& arch_path, const std::string& model_path,
                  const std::string& scenario_path, const std::string& out_cfg_path,
                  std::ostream& out, std::ostream& err) {
  try {
    ConfigMap arch_cfg = ConfigMap::parse_file(resolve_config_path(arch_path));
    ArchConfig arch = arch_from_config(arch_cfg);
    ModelConfig model =
        model_from_config(ConfigMap::parse_file(resolve_config_path(model_path)));
    Scenario scen =
        scenario_from_config(ConfigMap::parse_file(resolve_config_path(scenario_path)));

    bool found = false;
    ArchConfig best = arch;
    double best_score = 0;
    for (uint64_t i = 1; i <= overhead_steps; i++) {
      ArchConfig cand = arch;
      cand.dma_overhead_bytes = i * overhead_step;
      if (!validate(cand).ok()) continue;
      ClusterBenchmark b = cluster_benchmarks(model, cand);
      double gemm = b.gemm_mc_over_cc();
      double gemv = b.gemv_cc_over_mc();
      if (gemm < gemm_ratio_min || gemm > gemm_ratio_max) continue;
      if (gemv < gemv_ratio_min || gemv > gemv_ratio_max) continue;
      uint64_t l_e = balance_length(model, cand, scen).l_e;
      if (l_e < balance_len_min || l_e > balance_len_max) continue;
      double score = std::fabs(gemv - gemv_ratio_target);
      if (!found || score < best_score) {
        found = true;
        best = cand;
        best_score = score;
      }
    }
    if (!found) {
      err << "calibrate: no DMA overhead in [" << overhead_step << ", "
          << overhead_step * overhead_steps << "] meets the target bands\n";
      return 2;
    }

    ClusterBenchmark b = cluster_benchmarks(model, best);
    uint64_t l_e = balance_length(model, best, scen).l_e;
    ConfigMap out_cfg = arch_to_config(best);
    out_cfg.write_file(out_cfg_path,
                       "calibrated: dma overhead " + std::to_string(best.dma_overhead_bytes) +
                           " B, gemm mc/cc " + format_real(b.gemm_mc_over_cc()) +
                           ", gemv cc/mc " + format_real(b.gemv_cc_over_mc()) +
                           ", balance length " + std::to_string(l_e));
    out << "dma_overhead_bytes " << best.dma_overhead_bytes << ", gemm mc/cc "
        << format_real(b.gemm_mc_over_cc()) << ", gemv cc/mc "
        << format_real(b.gemv_cc_over_mc()) << ", l_e " << l_e << "\n";
    out << "wrote " << out_cfg_path << "\n";
    return 0;
  } catch (const std::overflow_error& e) {
    err << "error: overflow: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 2;
  }
}

}  // namespace hetsim
