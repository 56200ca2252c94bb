#include <iostream>
#include <thread>

#include "CLI11.hpp"
#include "hetsim/runner.h"

int main(int argc, char** argv) {
  CLI::App app{"performance explorer for a heterogeneous LLM inference chip"};
  app.require_subcommand(1);

  std::string arch, model, scenario, out_dir = "results", trace_cfg, out_path;
  uint64_t l_min = 1, l_max = 1024, seed = 0;
  bool dump_graph = false;
  int jobs = int(std::thread::hardware_concurrency());
  if (jobs < 1) jobs = 1;

  CLI::App* run = app.add_subcommand("run", "simulate one scenario and write reports");
  run->add_option("--arch", arch, "architecture config")->required();
  run->add_option("--model", model, "model config")->required();
  run->add_option("--scenario", scenario, "scenario config")->required();
  run->add_option("--out", out_dir, "output directory");
  run->add_flag("--dump-graph", dump_graph, "print the operator graph and exit");

  CLI::App* sweep = app.add_subcommand("sweep", "sweep output length and pick budgets per length");
  sweep->add_option("--arch", arch, "architecture config")->required();
  sweep->add_option("--model", model, "model config")->required();
  sweep->add_option("--scenario", scenario, "scenario config")->required();
  sweep->add_option("--l-min", l_min, "first output length");
  sweep->add_option("--l-max", l_max, "last output length");
  sweep->add_option("--out", out_dir, "output directory");

  CLI::App* validate = app.add_subcommand("validate", "check an architecture config");
  validate->add_option("--arch", arch, "architecture config")->required();

  CLI::App* gen = app.add_subcommand("gen-trace", "generate a synthetic activation trace");
  gen->add_option("--config", trace_cfg, "trace generator config")->required();
  gen->add_option("--out", out_path, "trace file (.bin for binary, else text)")->required();
  gen->add_option("--seed", seed, "override the config seed (0 keeps it)");

  CLI::App* fidelity = app.add_subcommand("prune-eval", "score pruning fidelity on a trace");
  fidelity->add_option("--trace", trace_cfg, "trace generator config")->required();
  fidelity->add_option("--model", model, "model config")->required();
  fidelity->add_option("--out", out_dir, "output directory");
  fidelity->add_option("--jobs", jobs, "worker threads");

  CLI::App* cal = app.add_subcommand("calibrate", "fit the DMA overhead to the target bands");
  cal->add_option("--arch", arch, "architecture config to start from")->required();
  cal->add_option("--model", model, "model config")->required();
  cal->add_option("--scenario", scenario, "scenario used for the balance-length check")->required();
  cal->add_option("--out", out_path, "calibrated architecture config to write")->required();

  CLI11_PARSE(app, argc, argv);

  if (run->parsed())
    return hetsim::cmd_run(arch, model, scenario, out_dir, dump_graph, std::cout, std::cerr);
  if (sweep->parsed())
    return hetsim::cmd_sweep(arch, model, scenario, l_min, l_max, out_dir, std::cout, std::cerr);
  if (validate->parsed()) return hetsim::cmd_validate(arch, std::cout, std::cerr);
  if (gen->parsed()) return hetsim::cmd_gen_trace(trace_cfg, out_path, seed, std::cout, std::cerr);
  if (fidelity->parsed())
    return hetsim::cmd_prune_eval(trace_cfg, model, out_dir, jobs, std::cout, std::cerr);
  if (cal->parsed())
    return hetsim::cmd_calibrate(arch, model, scenario, out_path, std::cout, std::cerr);
  return 1;
}
