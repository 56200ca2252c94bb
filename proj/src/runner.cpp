#include "hetsim/runner.h"

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <ostream>
#include <sstream>

#include "hetsim/config.h"

#include "json.hpp"

namespace hetsim {

namespace fs = std::filesystem;
using nlohmann::json;

std::string resolve_config_path(const std::string& path) {
  if (fs::exists(path)) return path;
  if (const char* dir = std::getenv("HETSIM_CONFIG_DIR")) {
    fs::path candidate = fs::path(dir) / path;
    if (fs::exists(candidate)) return candidate.string();
  }
  throw std::runtime_error("config not found: " + path);
}

RunInputs load_run_inputs(const std::string& arch_path, const std::string& model_path,
                          const std::string& scenario_path) {
  RunInputs in;
  std::string ap = resolve_config_path(arch_path);
  std::string mp = resolve_config_path(model_path);
  std::string sp = resolve_config_path(scenario_path);
  in.arch_cfg = ConfigMap::parse_file(ap);
  in.model_cfg = ConfigMap::parse_file(mp);
  in.scen_cfg = ConfigMap::parse_file(sp);
  in.arch = arch_from_config(in.arch_cfg);
  in.model = model_from_config(in.model_cfg);
  in.scen = scenario_from_config(in.scen_cfg);
  in.scenario_dir = fs::path(sp).parent_path().string();
  in.manifest = hash_hex(
      fnv1a64(in.arch_cfg.serialize() + in.model_cfg.serialize() + in.scen_cfg.serialize()));
  return in;
}

namespace {

std::string resolve_trace_path(const std::string& trace_path, const std::string& scenario_dir) {
  if (fs::exists(trace_path)) return trace_path;
  if (!scenario_dir.empty()) {
    fs::path candidate = fs::path(scenario_dir) / trace_path;
    if (fs::exists(candidate)) return candidate.string();
  }
  return resolve_config_path(trace_path);
}

PruneParams prune_params_of(const Scenario& scen) {
  PruneParams p;
  p.t = scen.prune.t;
  p.cores = scen.prune.cores;
  p.skip_first_layer = scen.prune.skip_first_layer;
  p.prune_vd = scen.prune.prune_vd;
  return p;
}

int guarded(std::ostream& err, const std::function<int()>& body) {
  try {
    return body();
  } catch (const std::overflow_error& e) {
    err << "error: overflow: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 2;
  }
}

double ms_of(double cycles, const ArchConfig& arch) { return cycles / arch.clock_hz * 1e3; }

json breakdown_json(const PhaseBreakdown& b) {
  return json{{"cycles", b.cycles}, {"dram_bytes", b.dram_bytes}, {"utilization", b.utilization}};
}

}  // namespace

RatioProfile scenario_prune_profile(const Scenario& scen, const ModelConfig& model,
                                    const std::string& scenario_dir) {
  RatioProfile profile;
  if (!scen.prune.enabled || scen.prune.trace_path.empty()) return profile;
  std::string path = resolve_trace_path(scen.prune.trace_path, scenario_dir);
  ActivationTrace trace;
  if (path.size() > 4 && path.compare(path.size() - 4, 4, ".cfg") == 0) {
    TraceSpec spec = trace_spec_from_config(ConfigMap::parse_file(path));
    trace = make_trace(spec);
  } else {
    trace = read_trace(path);
  }
  if (trace.layers != model.llm_layers)
    throw std::runtime_error("trace layer count " + std::to_string(trace.layers) +
                             " != model layers " + std::to_string(model.llm_layers));
  return dynamic_ratios(trace, prune_params_of(scen));
}

TraceSpec trace_spec_from_config(const ConfigMap& cfg) {
  TraceSpec spec;
  spec.layers = int(cfg.get_int("trace.layers"));
  spec.d_model = int(cfg.get_int("trace.d_model"));
  spec.d_ffn = int(cfg.get_int("trace.d_ffn"));
  spec.tokens = int(cfg.get_int("trace.tokens"));
  spec.outlier_fraction = cfg.get_real("trace.outlier_fraction", 0.05);
  spec.seed = cfg.get_u64("trace.seed", 1);
  std::istringstream sched(cfg.get_str("trace.kurtosis"));
  double v;
  while (sched >> v) spec.kurtosis_schedule.push_back(v);
  if (spec.kurtosis_schedule.empty())
    throw std::runtime_error("trace.kurtosis must list at least one value");
  return spec;
}

ActivationTrace make_trace(const TraceSpec& spec) {
  std::vector<double> schedule = spec.kurtosis_schedule;
  while (int(schedule.size()) < spec.layers) schedule.push_back(schedule.back());
  schedule.resize(spec.layers);
  return synth_trace(spec.layers, spec.d_model, spec.d_ffn, spec.tokens, schedule, spec.seed,
                     spec.outlier_fraction);
}

int cmd_run(const std::string& arch_path, const std::string& model_path,
            const std::string& scenario_path, const std::string& out_dir, bool dump,
            std::ostream& out, std::ostream& err) {
  return guarded(err, [&]() -> int {
    RunInputs in = load_run_inputs(arch_path, model_path, scenario_path);
    ValidationReport vr = validate(in.arch);
    if (!vr.ok()) {
      for (const std::string& v : vr.violations) err << "invalid arch: " << v << "\n";
      return 2;
    }
    if (dump) {
      OperatorGraph g = build_graph(in.model, in.scen);
      dump_graph(g, out);
      return 0;
    }

    std::vector<ReportRow> rows;
    json summary;
    summary["scenario"] = in.scen.id;
    summary["manifest"] = in.manifest;

    if (in.scen.mode == ScenarioMode::compare) {
      summary["mode"] = "compare";
      CompareResult res = compare_homo_hetero(in.model, in.arch, in.scen);
      json variants;
      for (const CompareRow& r : res.rows) {
        auto push = [&](const std::string& phase, double ms) {
          ReportRow row;
          row.scenario = in.scen.id;
          row.phase = r.variant + "-" + phase;
          row.cycles = ms / 1e3 * in.arch.clock_hz;
          row.latency_ms = ms;
          row.bw_ratio = r.configuration;
          row.manifest_hash = in.manifest;
          rows.push_back(row);
        };
        push("encode", r.encode_ms);
        push("prefill", r.prefill_ms);
        push("decode", r.decode_ms);
        push("total", r.total_ms);
        variants[r.variant] = {{"encode_ms", r.encode_ms},
                               {"prefill_ms", r.prefill_ms},
                               {"decode_ms", r.decode_ms},
                               {"total_ms", r.total_ms},
                               {"configuration", r.configuration}};
        out << r.variant << ": encode " << format_real(r.encode_ms) << " ms, prefill "
            << format_real(r.prefill_ms) << " ms, decode " << format_real(r.decode_ms)
            << " ms, total " << format_real(r.total_ms) << " ms (" << r.configuration << ")\n";
      }
      summary["variants"] = variants;
      summary["benchmark"] = {{"gemm_cc_cycles", res.bench.gemm_cc_cycles},
                              {"gemm_mc_cycles", res.bench.gemm_mc_cycles},
                              {"gemv_cc_cycles", res.bench.gemv_cc_cycles},
                              {"gemv_mc_cycles", res.bench.gemv_mc_cycles},
                              {"gemm_mc_over_cc", res.bench.gemm_mc_over_cc()},
                              {"gemv_cc_over_mc", res.bench.gemv_cc_over_mc()}};
      out << "gemm mc/cc " << format_real(res.bench.gemm_mc_over_cc()) << ", gemv cc/mc "
          << format_real(res.bench.gemv_cc_over_mc()) << "\n";
    } else {
      summary["mode"] = "pipeline";
      RatioProfile profile = scenario_prune_profile(in.scen, in.model, in.scenario_dir);
      PipelinePlan plan =
          pipeline_simulate(in.model, in.arch, in.scen, profile.ratio_vx, profile.ratio_vd);
      std::string ratio =
          std::to_string(plan.ratio_cc) + ":" + std::to_string(plan.ratio_mc);
      auto push = [&](const std::string& phase, const PhaseBreakdown& b, bool totals) {
        ReportRow row;
        row.scenario = in.scen.id;
        row.phase = phase;
        row.cycles = b.cycles;
        row.dram_bytes = b.dram_bytes;
        row.utilization = b.utilization;
        row.bw_ratio = ratio;
        row.manifest_hash = in.manifest;
        if (totals) {
          row.latency_ms = ms_of(plan.latency_cycles, in.arch);
          row.throughput_tokens_per_s = plan.tokens_per_s;
        }
        if (plan.pruned && (phase == "decode" || totals))
          row.prune_ratio_mean = plan.mean_prune_ratio_vx;
        rows.push_back(row);
      };
      push("encode", plan.encode, false);
      push("prefill", plan.prefill, false);
      push("decode", plan.decode, false);
      PhaseBreakdown total;
      total.cycles = plan.period_cycles;
      total.dram_bytes =
          plan.encode.dram_bytes + plan.prefill.dram_bytes + plan.decode.dram_bytes;
      push("total", total, true);

      summary["ratio"] = {{"cc", plan.ratio_cc}, {"mc", plan.ratio_mc}};
      summary["stage1_cycles"] = plan.stage1_cycles;
      summary["stage2_cycles"] = plan.stage2_cycles;
      summary["period_cycles"] = plan.period_cycles;
      summary["latency_ms"] = ms_of(plan.latency_cycles, in.arch);
      summary["tokens_per_s"] = plan.tokens_per_s;
      summary["phases"] = {{"encode", breakdown_json(plan.encode)},
                           {"prefill", breakdown_json(plan.prefill)},
                           {"decode", breakdown_json(plan.decode)}};
      summary["prune"] = {{"enabled", plan.pruned},
                          {"mean_ratio_vx", plan.mean_prune_ratio_vx},
                          {"mean_ratio_vd", plan.mean_prune_ratio_vd}};
      out << in.scen.id << ": period " << format_real(ms_of(plan.period_cycles, in.arch))
          << " ms, latency " << format_real(ms_of(plan.latency_cycles, in.arch))
          << " ms, " << format_real(plan.tokens_per_s) << " tokens/s, ratio " << ratio << "\n";
      if (plan.pruned)
        out << "prune ratio vx " << format_real(plan.mean_prune_ratio_vx) << ", vd "
            << format_real(plan.mean_prune_ratio_vd) << "\n";
    }

    write_text_atomic((fs::path(out_dir) / "results.csv").string(), csv_table(rows));
    write_text_atomic((fs::path(out_dir) / "summary.json").string(), summary.dump(2) + "\n");
    out << "wrote " << (fs::path(out_dir) / "results.csv").string() << "\n";
    return 0;
  });
}

int cmd_sweep(const std::string& arch_path, const std::string& model_path,
              const std::string& scenario_path, uint64_t l_min, uint64_t l_max,
              const std::string& out_dir, std::ostream& out, std::ostream& err) {
  return guarded(err, [&]() -> int {
    if (l_min < 1 || l_max < l_min) throw std::runtime_error("sweep needs 1 <= l_min <= l_max");
    RunInputs in = load_run_inputs(arch_path, model_path, scenario_path);
    ValidationReport vr = validate(in.arch);
    if (!vr.ok()) {
      for (const std::string& v : vr.violations) err << "invalid arch: " << v << "\n";
      return 2;
    }
    Scenario scen = in.scen;
    scen.output_tokens = l_max;
    scen.prune.enabled = false;
    OperatorGraph g = build_graph(in.model, scen);

    StagePool cc{&in.arch, ClusterKind::compute_centric, in.arch.total_cc_clusters()};
    StagePool mc{&in.arch, ClusterKind::memory_centric, in.arch.total_mc_clusters()};
    std::span<const Kernel> stage1(g.kernels.data(), g.encode_count + g.prefill_count);

    auto ratios = default_ratio_set();
    std::vector<double> stage1_cycles;  // per ratio, whole batch
    std::vector<std::vector<double>> prefixes;
    for (auto [c, m] : ratios) {
      BandwidthSplit split = split_bandwidth(in.arch, cc.clusters, mc.clusters, c, m);
      stage1_cycles.push_back(double(scen.batch) *
                              stage_latency(stage1, cc, split.stage1_bytes_per_cycle));
      prefixes.push_back(decode_time_prefix(g, mc, split.stage2_bytes_per_cycle));
    }
    size_t equal_index = 0;
    for (size_t i = 0; i < ratios.size(); i++)
      if (ratios[i].first == 1 && ratios[i].second == 1) equal_index = i;

    auto balance = [&](size_t i) {
      return std::fabs(std::log(double(ratios[i].first) / double(ratios[i].second)));
    };

    std::vector<ReportRow> rows;
    json table = json::array();
    for (uint64_t l = l_min; l <= l_max; l++) {
      size_t best = 0;
      double best_p = 0;
      bool first = true;
      for (size_t i = 0; i < ratios.size(); i++) {
        double p = std::max(stage1_cycles[i], prefixes[i][l]);
        bool better = first || p < best_p * (1.0 - 1e-12);
        bool tie = !first && std::fabs(p - best_p) <= best_p * 1e-12;
        if (better || (tie && balance(i) < balance(best))) {
          best = i;
          best_p = p;
        }
        first = false;
      }
      double equal_p = std::max(stage1_cycles[equal_index], prefixes[equal_index][l]);
      ReportRow row;
      row.scenario = in.scen.id;
      row.phase = "l=" + std::to_string(l);
      row.cycles = best_p;
      row.latency_ms = ms_of(best_p, in.arch);
      row.throughput_tokens_per_s =
          double(scen.batch) * double(l) * in.arch.clock_hz / best_p;
      row.bw_ratio =
          std::to_string(ratios[best].first) + ":" + std::to_string(ratios[best].second);
      row.manifest_hash = in.manifest;
      rows.push_back(row);
      table.push_back({{"l", l},
                       {"cc", ratios[best].first},
                       {"mc", ratios[best].second},
                       {"period_cycles", best_p},
                       {"equal_period_cycles", equal_p},
                       {"speedup_vs_equal", equal_p / best_p}});
    }

    BalancePoints bp = balance_length(in.model, in.arch, in.scen);
    json summary;
    summary["scenario"] = in.scen.id;
    summary["mode"] = "sweep";
    summary["manifest"] = in.manifest;
    summary["l_e"] = bp.l_e;
    summary["l_b"] = bp.l_b;
    summary["points"] = table;
    write_text_atomic((fs::path(out_dir) / "sweep.csv").string(), csv_table(rows));
    write_text_atomic((fs::path(out_dir) / "summary.json").string(), summary.dump(2) + "\n");
    out << "l_e " << bp.l_e << ", l_b " << bp.l_b << ", wrote "
        << (fs::path(out_dir) / "sweep.csv").string() << "\n";
    return 0;
  });
}

int cmd_validate(const std::string& arch_path, std::ostream& out, std::ostream& err) {
  return guarded(err, [&]() -> int {
    ConfigMap cfg = ConfigMap::parse_file(resolve_config_path(arch_path));
    ArchConfig arch = arch_from_config(cfg);
    ValidationReport vr = validate(arch);
    if (!vr.ok()) {
      for (const std::string& v : vr.violations) err << "invalid: " << v << "\n";
      return 2;
    }
    out << "ok: " << arch.total_cc_clusters() << " cc + " << arch.total_mc_clusters()
        << " mc clusters, peak " << format_real(peak_flops(arch) / 1e12) << " TFLOP/s, link "
        << format_real(arch.bytes_per_cycle()) << " B/cycle\n";
    return 0;
  });
}

int cmd_gen_trace(const std::string& trace_cfg_path, const std::string& out_path,
                  uint64_t seed_override, std::ostream& out, std::ostream& err) {
  return guarded(err, [&]() -> int {
    TraceSpec spec = trace_spec_from_config(ConfigMap::parse_file(resolve_config_path(trace_cfg_path)));
    if (seed_override != 0) spec.seed = seed_override;
    ActivationTrace trace = make_trace(spec);
    bool binary = out_path.size() > 4 && out_path.compare(out_path.size() - 4, 4, ".bin") == 0;
    if (binary)
      write_trace_binary(trace, out_path);
    else
      write_trace_text(trace, out_path);
    RatioProfile profile = dynamic_ratios(trace, PruneParams{});
    out << "wrote " << out_path << " (" << trace.tokens << " tokens x " << trace.layers
        << " layers), mean dynamic ratio vx " << format_real(profile.mean_vx) << ", vd "
        << format_real(profile.mean_vd) << "\n";
    return 0;
  });
}

int cmd_prune_eval(const std::string& trace_cfg_path, const std::string& model_path,
                   const std::string& out_dir, int jobs, std::ostream& out, std::ostream& err) {
  return guarded(err, [&]() -> int {
    TraceSpec spec = trace_spec_from_config(ConfigMap::parse_file(resolve_config_path(trace_cfg_path)));
    ModelConfig model = model_from_config(ConfigMap::parse_file(resolve_config_path(model_path)));
    ActivationTrace trace = make_trace(spec);
    FfnWeights w = FfnWeights::random(trace.d_model, trace.d_ffn, spec.seed + 1);
    FidelityReport rep = pruned_ffn_eval(trace, w, PruneParams{}, model, jobs);

    std::string manifest = hash_hex(fnv1a64(trace.model_name + std::to_string(spec.seed)));
    std::vector<ReportRow> rows;
    json layers = json::array();
    for (size_t i = 0; i < rep.layers.size(); i++) {
      const LayerFidelity& lf = rep.layers[i];
      ReportRow row;
      row.scenario = "prune-eval";
      row.phase = "layer=" + std::to_string(i);
      row.prune_ratio_mean = lf.ratio_vx;
      row.manifest_hash = manifest;
      rows.push_back(row);
      layers.push_back({{"layer", i},
                        {"cos_dynamic", lf.cos_dynamic},
                        {"cos_fixed_low", lf.cos_fixed_low},
                        {"cos_fixed_high", lf.cos_fixed_high},
                        {"ratio_vx", lf.ratio_vx},
                        {"ratio_vd", lf.ratio_vd}});
    }
    json summary;
    summary["mode"] = "prune-eval";
    summary["layers"] = layers;
    summary["mean_cos_dynamic"] = rep.mean_cos_dynamic;
    summary["mean_cos_fixed_low"] = rep.mean_cos_fixed_low;
    summary["mean_cos_fixed_high"] = rep.mean_cos_fixed_high;
    summary["mean_ratio_vx"] = rep.mean_ratio_vx;
    summary["mean_ratio_vd"] = rep.mean_ratio_vd;
    write_text_atomic((fs::path(out_dir) / "prune-eval.csv").string(), csv_table(rows));
    write_text_atomic((fs::path(out_dir) / "summary.json").string(), summary.dump(2) + "\n");
    out << "mean cos: dynamic " << format_real(rep.mean_cos_dynamic) << ", fixed-0.1 "
        << format_real(rep.mean_cos_fixed_low) << ", fixed-0.7 "
        << format_real(rep.mean_cos_fixed_high) << "; mean ratio vx "
        << format_real(rep.mean_ratio_vx) << "\n";
    return 0;
  });
}

}  // namespace hetsim
