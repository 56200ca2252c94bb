#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "hetsim/pipeline.h"
#include "hetsim/pruning.h"
#include "hetsim/report.h"

namespace hetsim {

// Returns the path itself when it exists; otherwise retries under
// $HETSIM_CONFIG_DIR.  Throws when neither resolves.
std::string resolve_config_path(const std::string& path);

struct RunInputs {
  ConfigMap arch_cfg, model_cfg, scen_cfg;
  ArchConfig arch;
  ModelConfig model;
  Scenario scen;
  std::string scenario_dir;  // directory of the scenario file, for relative trace paths
  std::string manifest;      // hash of the three canonical config serializations
};

RunInputs load_run_inputs(const std::string& arch_path, const std::string& model_path,
                          const std::string& scenario_path);

// Trace-derived per-layer prune ratios for a scenario.  Empty when pruning
// is off or the scenario carries no trace (a uniform ratio is then applied
// inside pipeline_simulate).  A ".cfg" trace path names generator
// parameters; anything else is a stored trace file.
RatioProfile scenario_prune_profile(const Scenario& scen, const ModelConfig& model,
                                    const std::string& scenario_dir);

// Synthetic-trace generator parameters, loadable from a config file
// (trace.layers, trace.d_model, trace.d_ffn, trace.tokens, trace.seed,
// trace.outlier_fraction, trace.kurtosis as a space-separated schedule that
// repeats its last entry up to `layers`).
struct TraceSpec {
  int layers = 0;
  int d_model = 0;
  int d_ffn = 0;
  int tokens = 0;
  double outlier_fraction = 0.05;
  uint64_t seed = 1;
  std::vector<double> kurtosis_schedule;
};

TraceSpec trace_spec_from_config(const ConfigMap& cfg);
ActivationTrace make_trace(const TraceSpec& spec);

// Subcommand bodies.  Each returns a process exit code: 0 success, 2 invalid
// input or failed validation, 3 arithmetic overflow in workload accounting.
int cmd_run(const std::string& arch_path, const std::string& model_path,
            const std::string& scenario_path, const std::string& out_dir, bool dump_graph,
            std::ostream& out, std::ostream& err);

int cmd_sweep(const std::string& arch_path, const std::string& model_path,
              const std::string& scenario_path, uint64_t l_min, uint64_t l_max,
              const std::string& out_dir, std::ostream& out, std::ostream& err);

int cmd_validate(const std::string& arch_path, std::ostream& out, std::ostream& err);

int cmd_gen_trace(const std::string& trace_cfg_path, const std::string& out_path,
                  uint64_t seed_override, std::ostream& out, std::ostream& err);

int cmd_prune_eval(const std::string& trace_cfg_path, const std::string& model_path,
                   const std::string& out_dir, int jobs, std::ostream& out, std::ostream& err);

int cmd_calibrate(const std::string& arch_path, const std::string& model_path,
                  const std::string& scenario_path, const std::string& out_cfg_path,
                  std::ostream& out, std::ostream& err);

}  // namespace hetsim
