// Acceptance gate: one line per criterion (A1..A4 analytic-model exactness,
// B1..B5 behavioral invariants, C1..C3 end-to-end comparisons on the shipped
// configs).  Run from anywhere with the repo root as argv[1]; exits with the
// number of failed criteria.
#include <chrono>
#include <cmath>
#include <cstdarg>
#include <cstdint>
#include <cstdio>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "hetsim/config.h"
#include "hetsim/coproc.h"
#include "hetsim/memsys.h"
#include "hetsim/pipeline.h"
#include "hetsim/pruning.h"
#include "hetsim/runner.h"
#include "hetsim/workload.h"

using namespace hetsim;

namespace {

int failures = 0;
std::string root = ".";

void report(const char* id, bool ok, const std::string& detail) {
  std::printf("[%s] %s: %s\n", ok ? "PASS" : "FAIL", id, detail.c_str());
  if (!ok) failures++;
}

template <typename Fn>
void criterion(const char* id, Fn fn) {
  try {
    fn();
  } catch (const std::exception& e) {
    report(id, false, std::string("exception: ") + e.what());
  }
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string fmt(const char* pattern, ...) {
  char buf[512];
  va_list args;
  va_start(args, pattern);
  vsnprintf(buf, sizeof buf, pattern, args);
  va_end(args);
  return buf;
}

std::string cfg(const std::string& name) { return root + "/configs/" + name; }

ConfigMap load_cfg(const std::string& name) { return ConfigMap::parse_file(cfg(name)); }

bool in_band(double v, double lo, double hi) { return v >= lo && v <= hi; }

// ---------------------------------------------------------------- A criteria

void a1_sa_tile_form() {
  auto t0 = std::chrono::steady_clock::now();
  const uint64_t rs[] = {1, 2, 3, 8, 16};
  const uint64_t cs[] = {1, 2, 5, 16, 32};
  const uint64_t ms[] = {1, 2, 7, 64};
  int n = 0, bad = 0;
  for (uint64_t r : rs)
    for (uint64_t c : cs)
      for (uint64_t m : ms) {
        n++;
        if (sa_tile_cycles(r, c, m) != 2 * r + c + m - 3) bad++;
      }
  double el = seconds_since(t0);
  report("A1", bad == 0 && n == 100 && el < 1.0,
         fmt("systolic tile latency exact on %d (R,C,M) triples, %d mismatches, %.3f s", n, bad,
             el));
}

void a2_cim_pass_form() {
  auto t0 = std::chrono::steady_clock::now();
  const uint64_t ps[] = {1, 2, 3, 5, 8, 16, 33, 100, 1000, 4096};
  const uint64_t ws[] = {1, 2, 3, 4, 8, 12, 16, 24, 32, 48};
  int n = 0, bad = 0;
  for (uint64_t p : ps)
    for (uint64_t w : ws) {
      n++;
      if (cim_pass_cycles(p, w) != p * w + 1) bad++;
    }
  double el = seconds_since(t0);
  report("A2", bad == 0 && n == 100 && el < 1.0,
         fmt("bit-serial pass chain exact on %d (passes,W) pairs, %d mismatches, %.3f s", n, bad,
             el));
}

void a3_micro_oracle() {
  auto t0 = std::chrono::steady_clock::now();
  std::mt19937_64 rng(12345);
  auto draw = [&](uint64_t lo, uint64_t hi) { return lo + rng() % (hi - lo + 1); };
  int n = 0, bad = 0;
  for (int i = 0; i < 100; i++) {
    Kernel kn;
    kn.kind = KernelKind::gemm;
    kn.m = draw(1, 32);
    kn.k = draw(1, 32);
    kn.n = draw(1, 32);
    SaSpec sa;
    sa.rows = int(draw(1, 16));
    sa.cols = int(draw(1, 16));
    sa.matrix_registers = int(draw(2, 6));
    int cores = int(draw(1, 4));
    n++;
    if (map_gemm_sa(kn, sa, cores).compute_cycles != micro_simulate(kn, sa, cores)) bad++;
  }
  for (int i = 0; i < 100; i++) {
    Kernel kn;
    kn.kind = (i % 2) ? KernelKind::gemv : KernelKind::gemm;
    kn.m = draw(1, 32);
    kn.k = draw(1, 32);
    kn.n = draw(1, 32);
    CimSpec cim;
    cim.cols = int(draw(1, 16));
    cim.subarrays_per_col = int(draw(1, 16));
    cim.depth = int(draw(1, 32));
    cim.act_bits = int(draw(1, 8));
    int cores = int(draw(1, 4));
    n++;
    uint64_t analytic = (kn.kind == KernelKind::gemv) ? map_gemv_cim(kn, cim, cores).compute_cycles
                                                      : map_gemm_cim(kn, cim, cores).compute_cycles;
    if (analytic != micro_simulate(kn, cim, cores)) bad++;
  }
  double el = seconds_since(t0);
  report("A3", bad == 0 && n == 200 && el < 10.0,
         fmt("analytic mapping == cycle-stepped oracle on %d cases (dims <= 32), %d mismatches, "
             "%.3f s",
             n, bad, el));
}

void a4_prune_algebra() {
  const double tol = 1e-6;
  std::mt19937_64 rng(777);
  std::normal_distribution<double> gauss(0.0, 1.0);
  double worst = 0.0;
  for (int rep = 0; rep < 50; rep++) {
    int d = int(8 + rng() % 25);
    int f = int(8 + rng() % 41);
    FfnWeights w = FfnWeights::random(d, f, rng());
    Activation act = (rep % 3 == 0)   ? Activation::relu
                     : (rep % 3 == 1) ? Activation::silu
                                      : Activation::gelu;
    std::vector<double> v(d);
    for (double& x : v) x = gauss(rng);
    std::vector<uint8_t> keep(d);
    int kept = 0;
    for (int j = 0; j < d; j++) kept += keep[j] = rng() % 2;
    if (kept == 0) keep[0] = 1;

    std::vector<double> masked = v;
    FfnWeights pruned = w;
    for (int j = 0; j < d; j++)
      if (!keep[j]) {
        masked[j] = 0.0;
        for (int i = 0; i < f; i++) {
          pruned.up.at(i, j) = 0.0;
          pruned.gate.at(i, j) = 0.0;
        }
      }
    std::vector<double> a = ffn_reference(masked, w.up, w.gate, w.down, act);
    std::vector<double> b = ffn_reference(v, pruned.up, pruned.gate, pruned.down, act);
    double num = 0, den = 0;
    for (int i = 0; i < d; i++) {
      num += (a[i] - b[i]) * (a[i] - b[i]);
      den += a[i] * a[i];
    }
    double rel = std::sqrt(num) / std::max(std::sqrt(den), 1e-300);
    worst = std::max(worst, rel);
  }
  report("A4", worst <= tol,
         fmt("masking inputs == pruning weight columns over 50 FFNs, worst rel err %.3g (tol %g)",
             worst, tol));
}

// ---------------------------------------------------------------- B criteria

void b1_k_monotone() {
  const int layers = 8, d = 128, tokens = 1000;
  std::vector<double> sched(layers);
  for (int l = 0; l < layers; l++) sched[l] = 3.2 + 2.8 * l / (layers - 1);
  ActivationTrace trace = synth_trace(layers, d, d, tokens, sched, 42, 0.05);
  PruneParams p;
  p.cores = 1;
  int bad_reset = 0, bad_mono = 0;
  for (int tok = 0; tok < tokens; tok++) {
    PruningState st;
    st.reset_token(d);
    if (st.k != uint64_t(d)) bad_reset++;
    uint64_t prev = 0;
    for (int l = 0; l < layers; l++) {
      dynamic_topk_step(trace.vx_at(tok, l), st, p);
      if (l >= 2 && st.k > prev) bad_mono++;
      prev = st.k;
    }
  }
  report("B1", bad_reset == 0 && bad_mono == 0,
         fmt("k non-increasing after layer 1 over %d tokens x %d layers (%d resets missed, %d "
             "increases)",
             tokens, layers, bad_reset, bad_mono));
}

void b2_throttle_conservation() {
  std::mt19937_64 rng(99);
  int steps = 0, bad = 0;
  for (int run = 0; run < 10; run++) {
    uint64_t budget = 1 + rng() % 5000;
    uint64_t interval = 100 + rng() % 1000;
    PmcState st;
    uint64_t now = 0;
    for (int i = 0; i < 1000; i++) {
      now += rng() % (interval / 2 + 1);
      uint64_t bytes = rng() % (budget + 1);  // larger requests can never be granted and throw
      throttle_step(st, bytes, budget, interval, now);
      steps++;
      uint64_t intervals = st.interval_index + 1;
      if (st.total_granted > intervals * budget) bad++;
    }
  }
  report("B2", bad == 0,
         fmt("granted bytes <= n*B across %d fuzzed steps (%d violations)", steps, bad));
}

void b3_allocation_dominance() {
  RunInputs in = load_run_inputs(cfg("arch-hetero.cfg"), cfg("model-vlm-1.1b.cfg"),
                                 cfg("scenario-sweep-base.cfg"));
  static const std::pair<int, int> equal_only[] = {{1, 1}};
  int bad = 0, strict = 0;
  for (uint64_t l = 1; l <= 1024; l++) {
    AllocationChoice best = allocate_bandwidth(l, in.model, in.arch, in.scen);
    AllocationChoice equal =
        allocate_bandwidth(l, in.model, in.arch, in.scen, std::span(equal_only, 1));
    if (best.period_cycles > equal.period_cycles * (1.0 + 1e-9)) bad++;
    if (best.period_cycles < equal.period_cycles * (1.0 - 1e-9)) strict++;
  }
  report("B3", bad == 0,
         fmt("chosen ratio <= equal split for every l in 1..1024 (%d violations, strictly better "
             "at %d lengths)",
             bad, strict));
}

void b4_batch_monotone() {
  RunInputs in = load_run_inputs(cfg("arch-hetero.cfg"), cfg("model-vlm-1.1b.cfg"),
                                 cfg("scenario-sweep-base.cfg"));
  Scenario scen = in.scen;
  scen.output_tokens = 1024;
  const uint64_t batches[] = {1, 2, 4, 8, 16};
  double prev_thr = 0, prev_lat = 0, first_thr = 0, last_thr = 0;
  int bad = 0;
  for (uint64_t b : batches) {
    scen.batch = b;
    PipelinePlan plan = pipeline_simulate(in.model, in.arch, scen);
    if (b == 1) first_thr = plan.tokens_per_s;
    last_thr = plan.tokens_per_s;
    if (prev_thr > plan.tokens_per_s * (1.0 + 1e-9)) bad++;
    if (prev_lat > plan.latency_cycles * (1.0 + 1e-9)) bad++;
    prev_thr = plan.tokens_per_s;
    prev_lat = plan.latency_cycles;
  }
  report("B4", bad == 0,
         fmt("throughput and latency non-decreasing over batch {1,2,4,8,16} at l=1024 (%d "
             "violations; %.0f -> %.0f tokens/s)",
             bad, first_thr, last_thr));
}

void b5_gemm_gemv_dichotomy() {
  ArchConfig arch = default_arch();
  const SaSpec& sa = arch.cc_cluster.sa();
  const CimSpec& cim = arch.mc_cluster.cim();
  uint64_t r = uint64_t(sa.rows), c = uint64_t(sa.cols), w = uint64_t(cim.act_bits);
  bool low = cim_pass_cycles(1, w) < sa_tile_cycles(r, c, 1);
  bool high = true;
  for (uint64_t m : {w, 2 * w, uint64_t(64), uint64_t(300)})
    high = high && cim_pass_cycles(m, w) > sa_tile_cycles(r, c, m);
  report("B5", low && high,
         fmt("single-row: CIM %llu < SA %llu cycles; reversed for M >= W=%llu",
             (unsigned long long)cim_pass_cycles(1, w),
             (unsigned long long)sa_tile_cycles(r, c, 1), (unsigned long long)w));
}

// ---------------------------------------------------------------- C criteria

void c1_phase_affinity() {
  auto t0 = std::chrono::steady_clock::now();
  RunInputs in = load_run_inputs(cfg("arch-hetero.cfg"), cfg("model-vlm-1.1b.cfg"),
                                 cfg("scenario-compare.cfg"));
  CompareResult res = compare_homo_hetero(in.model, in.arch, in.scen);
  const CompareRow& het = res.row("hetero");
  const CompareRow& hcc = res.row("homo-cc");
  const CompareRow& hmc = res.row("homo-mc");

  bool gemm_phases = hcc.encode_ms < het.encode_ms && hcc.encode_ms < hmc.encode_ms &&
                     hcc.prefill_ms < het.prefill_ms && hcc.prefill_ms < hmc.prefill_ms;
  bool gemv_phase =
      hmc.decode_ms < hcc.decode_ms && hmc.decode_ms <= het.decode_ms * (1.0 + 1e-9);
  bool full = het.total_ms < hcc.total_ms && het.total_ms < hmc.total_ms;

  double gemm_ratio = res.bench.gemm_mc_over_cc();
  double gemv_ratio = res.bench.gemv_cc_over_mc();
  double r_cc = hcc.total_ms / het.total_ms;
  double r_mc = hmc.total_ms / het.total_ms;
  bool bands = in_band(gemm_ratio, 3.0, 6.0) && in_band(gemv_ratio, 1.8, 3.2) &&
               in_band(r_cc, 1.79 * 0.6, 1.79 * 1.4) && in_band(r_mc, 2.65 * 0.6, 2.65 * 1.4);
  double el = seconds_since(t0);
  report("C1", gemm_phases && gemv_phase && full && bands && el < 60.0,
         fmt("orderings %s; gemm mc/cc %.2f in [3,6], gemv cc/mc %.2f in [1.8,3.2]; totals "
             "cc/het %.2f (band 1.07..2.51), mc/het %.2f (band 1.59..3.71); %.1f s",
             (gemm_phases && gemv_phase && full) ? "hold" : "VIOLATED", gemm_ratio, gemv_ratio,
             r_cc, r_mc, el));
}

void c2_prune_fidelity() {
  RunInputs in = load_run_inputs(cfg("arch-hetero.cfg"), cfg("model-vlm-1.1b.cfg"),
                                 cfg("scenario-prune-stream.cfg"));
  RatioProfile prof = scenario_prune_profile(in.scen, in.model, in.scenario_dir);
  int bad_mono = 0;
  for (size_t l = 0; l + 1 < prof.ratio_vx.size(); l++)
    if (prof.ratio_vx[l + 1] < prof.ratio_vx[l] - 1e-12) bad_mono++;

  TraceSpec spec = trace_spec_from_config(load_cfg("trace-eval.cfg"));
  ActivationTrace trace = make_trace(spec);
  PruneParams p;
  p.t = in.scen.prune.t;
  p.cores = in.scen.prune.cores;
  p.skip_first_layer = in.scen.prune.skip_first_layer;
  p.prune_vd = in.scen.prune.prune_vd;
  FfnWeights w = FfnWeights::random(trace.d_model, trace.d_ffn, spec.seed + 1);
  FidelityReport rep = pruned_ffn_eval(trace, w, p, in.model, 4);
  double gap_low = rep.mean_cos_dynamic - rep.mean_cos_fixed_low;
  double first5 = 0;
  for (int l = 0; l < 5; l++) first5 += rep.layers[l].cos_dynamic - rep.layers[l].cos_fixed_high;
  first5 /= 5;

  OperatorGraph g = build_graph(in.model, in.scen);
  OperatorGraph gp = traffic_reduction(g, prof.ratio_vx, prof.ratio_vd, p.prune_vd);
  double dense = double(g.totals(Phase::decode).weight_bytes);
  double pruned = double(gp.totals(Phase::decode).weight_bytes);
  double reduction = 1.0 - pruned / dense;

  bool ok = bad_mono == 0 && gap_low >= -0.005 && first5 >= 0.02 &&
            in_band(reduction, 0.30, 0.55);
  report("C2", ok,
         fmt("per-layer ratios non-decreasing (%d dips); dynamic-vs-fixed-0.1 cosine gap %.4f >= "
             "-0.005; first-5-layer lead over fixed-0.7 %.3f >= 0.02; decode weight traffic "
             "-%.1f%% in [30,55]",
             bad_mono, gap_low, first5, reduction * 100));
}

void c3_bandwidth_management() {
  RunInputs base = load_run_inputs(cfg("arch-hetero.cfg"), cfg("model-vlm-1.1b.cfg"),
                                   cfg("scenario-sweep-base.cfg"));
  BalancePoints bp = balance_length(base.model, base.arch, base.scen);
  bool le_ok = bp.l_e >= 20 && bp.l_e <= 60;

  RunInputs dyn = load_run_inputs(cfg("arch-hetero.cfg"), cfg("model-vlm-1.1b.cfg"),
                                  cfg("scenario-stream-128.cfg"));
  RunInputs eq = load_run_inputs(cfg("arch-hetero.cfg"), cfg("model-vlm-1.1b.cfg"),
                                 cfg("scenario-stream-128-equal.cfg"));
  PipelinePlan plan_d = pipeline_simulate(dyn.model, dyn.arch, dyn.scen);
  PipelinePlan plan_e = pipeline_simulate(eq.model, eq.arch, eq.scen);
  double lat_cut = 1.0 - plan_d.latency_cycles / plan_e.latency_cycles;
  double thr_lift = plan_d.tokens_per_s / plan_e.tokens_per_s;
  bool stream_ok = lat_cut >= 0.25 && thr_lift >= 1.5;

  RunInputs bat = load_run_inputs(cfg("arch-hetero.cfg"), cfg("model-vlm-1.1b.cfg"),
                                  cfg("scenario-batch-1024.cfg"));
  RunInputs b1 = load_run_inputs(cfg("arch-hetero.cfg"), cfg("model-vlm-1.1b.cfg"),
                                 cfg("scenario-batch-1024-b1.cfg"));
  PipelinePlan plan_b = pipeline_simulate(bat.model, bat.arch, bat.scen);
  PipelinePlan plan_1 = pipeline_simulate(b1.model, b1.arch, b1.scen);
  double thr_batch = plan_b.tokens_per_s / plan_1.tokens_per_s;
  double overhead = plan_b.latency_cycles / plan_1.latency_cycles - 1.0;
  bool batch_ok = thr_batch >= 10.0 && overhead <= 0.60;

  report("C3", le_ok && stream_ok && batch_ok,
         fmt("l_e %llu in [20,60]; stream-128 latency -%.1f%% (>=25%%), throughput %.2fx "
             "(>=1.5x); batch-%llu throughput %.1fx (>=10x), latency overhead %.0f%% (<=60%%)",
             (unsigned long long)bp.l_e, lat_cut * 100, thr_lift,
             (unsigned long long)bat.scen.batch, thr_batch, overhead * 100));
}

}  // namespace

int main(int argc, char** argv) {
  if (argc > 1) root = argv[1];
  criterion("A1", a1_sa_tile_form);
  criterion("A2", a2_cim_pass_form);
  criterion("A3", a3_micro_oracle);
  criterion("A4", a4_prune_algebra);
  criterion("B1", b1_k_monotone);
  criterion("B2", b2_throttle_conservation);
  criterion("B3", b3_allocation_dominance);
  criterion("B4", b4_batch_monotone);
  criterion("B5", b5_gemm_gemv_dichotomy);
  criterion("C1", c1_phase_affinity);
  criterion("C2", c2_prune_fidelity);
  criterion("C3", c3_bandwidth_management);
  if (failures) std::printf("%d criterion(s) failed\n", failures);
  return failures;
}
