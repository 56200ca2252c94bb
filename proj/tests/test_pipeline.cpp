#include "hetsim/pipeline.h"

#include <cmath>
#include <stdexcept>

#include "doctest.h"

using namespace hetsim;

namespace {

// Default chip with the transfer overhead pinned, so wire-cycle constants in
// this file stay frozen.
ArchConfig test_arch() {
  ArchConfig a = default_arch();
  a.dma_overhead_bytes = 24576;
  return a;
}

Kernel bench_gemv() {
  Kernel kn;
  kn.kind = KernelKind::gemv;
  kn.name = "bench_gemv";
  kn.m = 1;
  kn.k = 2048;
  kn.n = 2048;
  kn.weight_bytes = uint64_t(2048) * 2048 * 2;
  kn.act_bytes = 2048 * 2;
  kn.out_bytes = 2048 * 2;
  kn.flops = 2 * uint64_t(2048) * 2048;
  return kn;
}

Kernel bench_gemm() {
  Kernel kn = bench_gemv();
  kn.kind = KernelKind::gemm;
  kn.name = "bench_gemm";
  kn.m = 300;
  kn.act_bytes = uint64_t(300) * 2048 * 2;
  kn.out_bytes = uint64_t(300) * 2048 * 2;
  kn.flops = 2 * uint64_t(300) * 2048 * 2048;
  return kn;
}

Scenario short_scenario(uint64_t l_out = 32, uint64_t batch = 1) {
  Scenario s;
  s.input_tokens = 300;
  s.output_tokens = l_out;
  s.batch = batch;
  s.policy = BandwidthPolicy::dynamic;
  return s;
}

}  // namespace

TEST_CASE("stage pools expose cluster resources") {
  ArchConfig a = test_arch();
  StagePool cc{&a, ClusterKind::compute_centric, a.total_cc_clusters()};
  StagePool mc{&a, ClusterKind::memory_centric, a.total_mc_clusters()};
  CHECK(cc.clusters == 8);
  CHECK(cc.total_cores() == 32);
  CHECK(cc.stream_chunk_bytes() == 16384);
  CHECK(mc.clusters == 8);
  CHECK(mc.total_cores() == 16);
  CHECK(mc.stream_chunk_bytes() == 360448);
  CHECK(&cc.cluster() == &a.cc_cluster);
  CHECK(&mc.cluster() == &a.mc_cluster);
}

TEST_CASE("bandwidth split follows the stage ratio") {
  ArchConfig a = test_arch();
  BandwidthSplit s = split_bandwidth(a, 8, 8, 1, 7);
  CHECK(s.stage1_bytes_per_cycle == doctest::Approx(42.0));
  CHECK(s.stage2_bytes_per_cycle == doctest::Approx(294.0));
  BandwidthSplit eq = split_bandwidth(a, 8, 8, 1, 1);
  CHECK(eq.stage1_bytes_per_cycle == doctest::Approx(168.0));
  CHECK(eq.stage1_bytes_per_cycle + eq.stage2_bytes_per_cycle ==
        doctest::Approx(a.bytes_per_cycle()));

  CHECK_THROWS_AS(split_bandwidth(a, 0, 8, 1, 1), std::invalid_argument);
  CHECK_THROWS_AS(split_bandwidth(a, 8, 8, 0, 1), std::invalid_argument);
}

TEST_CASE("ratio candidates run from decode-heavy to prefill-heavy") {
  auto ratios = default_ratio_set();
  REQUIRE(ratios.size() == 9);
  CHECK(ratios.front() == std::pair<int, int>{1, 7});
  CHECK(ratios.back() == std::pair<int, int>{7, 1});
  bool has_equal = false;
  for (auto [c, m] : ratios) {
    CHECK(c >= 1);
    CHECK(m >= 1);
    if (c == 1 && m == 1) has_equal = true;
  }
  CHECK(has_equal);
}

TEST_CASE("kernel roofline: compute-bound GEMM, memory-bound GEMV") {
  ArchConfig a = test_arch();
  StagePool cc{&a, ClusterKind::compute_centric, a.total_cc_clusters()};
  StagePool mc{&a, ClusterKind::memory_centric, a.total_mc_clusters()};

  // 300x2048x2048 over 32 SA cores: 128x128 weight tiles, 512 per core,
  // 345 cycles each; the wire side needs only ~81k cycles at the full link.
  Kernel gm = bench_gemm();
  CHECK(kernel_time_cycles(gm, cc, a.bytes_per_cycle()) == 176640.0);

  // The decode-shaped GEMV is wire-dominated on the CIM pool: 8396800
  // payload bytes in 24 macro-sized transfers.
  Kernel gv = bench_gemv();
  double mem = (8396800.0 + 24 * 24576.0) / 294.0;
  CHECK(kernel_time_cycles(gv, mc, 294.0) == doctest::Approx(mem).epsilon(1e-12));

  // Starving the GEMM flips it to the memory side.
  double starved = kernel_time_cycles(gm, cc, 0.5);
  CHECK(starved == doctest::Approx((10846208.0 + 662 * 24576.0) / 0.5).epsilon(1e-12));

  StagePool empty{&a, ClusterKind::compute_centric, 0};
  CHECK_THROWS_AS(kernel_time_cycles(gm, empty, 336.0), std::invalid_argument);
}

TEST_CASE("stage latency is additive over kernels") {
  ArchConfig a = test_arch();
  StagePool mc{&a, ClusterKind::memory_centric, a.total_mc_clusters()};
  std::vector<Kernel> kernels = {bench_gemm(), bench_gemv(), bench_gemv()};
  double sum = 0;
  for (const Kernel& kn : kernels) sum += kernel_time_cycles(kn, mc, 100.0);
  CHECK(stage_latency(kernels, mc, 100.0) == doctest::Approx(sum).epsilon(1e-12));
}

TEST_CASE("decode prefix is cumulative with non-decreasing iteration cost") {
  ArchConfig a = test_arch();
  ModelConfig m;
  Scenario s = short_scenario(6);
  OperatorGraph g = build_graph(m, s);
  StagePool mc{&a, ClusterKind::memory_centric, a.total_mc_clusters()};
  std::vector<double> prefix = decode_time_prefix(g, mc, 168.0);
  REQUIRE(prefix.size() == 7);
  CHECK(prefix[0] == 0.0);
  for (size_t i = 1; i < prefix.size(); i++) CHECK(prefix[i] > prefix[i - 1]);
  // The KV cache grows, so each iteration costs at least as much as the last.
  for (size_t i = 2; i < prefix.size(); i++) {
    double prev = prefix[i - 1] - prefix[i - 2];
    double cur = prefix[i] - prefix[i - 1];
    CHECK(cur >= prev - 1e-9);
  }
  // More bandwidth never slows decode down.
  std::vector<double> fast = decode_time_prefix(g, mc, 294.0);
  for (size_t i = 1; i < prefix.size(); i++) CHECK(fast[i] < prefix[i]);

  StagePool none{&a, ClusterKind::memory_centric, 0};
  CHECK_THROWS_AS(decode_time_prefix(g, none, 168.0), std::invalid_argument);
}

TEST_CASE("pipeline plan invariants") {
  ArchConfig a = test_arch();
  ModelConfig m;
  Scenario s = short_scenario(32);
  PipelinePlan plan = pipeline_simulate(m, a, s);

  CHECK(plan.period_cycles ==
        doctest::Approx(std::max(plan.stage1_cycles, plan.stage2_cycles)).epsilon(1e-12));
  CHECK(plan.latency_cycles ==
        doctest::Approx(plan.stage1_cycles + plan.stage2_cycles).epsilon(1e-12));
  CHECK(plan.tokens_per_s ==
        doctest::Approx(32.0 * a.clock_hz / plan.period_cycles).epsilon(1e-12));
  CHECK(plan.encode.cycles > 0);
  CHECK(plan.prefill.cycles > 0);
  CHECK(plan.decode.cycles == plan.stage2_cycles);
  CHECK(plan.encode.utilization > 0);
  CHECK(plan.encode.utilization <= 1.0 + 1e-9);
  CHECK(plan.decode.utilization > 0);
  CHECK(plan.decode.utilization <= 1.0 + 1e-9);
  CHECK(!plan.pruned);

  OperatorGraph g = build_graph(m, s);
  CHECK(plan.encode.dram_bytes == g.totals(Phase::encode).dram_bytes());
  CHECK(plan.decode.dram_bytes == g.totals(Phase::decode).dram_bytes());

  // Budgets divide each stage share across its clusters every interval.
  Scenario eq = s;
  eq.policy = BandwidthPolicy::equal;
  PipelinePlan ep = pipeline_simulate(m, a, eq);
  CHECK(ep.ratio_cc == 1);
  CHECK(ep.ratio_mc == 1);
  CHECK(ep.budget.interval_cycles == 10000);
  CHECK(ep.budget.cc_bytes_per_interval == 210000);
  CHECK(ep.budget.mc_bytes_per_interval == 210000);

  // The dynamic policy searches a superset including the equal split.
  CHECK(plan.period_cycles <= ep.period_cycles * (1 + 1e-12));

  Scenario fx = s;
  fx.policy = BandwidthPolicy::fixed;
  fx.fixed_ratio_cc = 2;
  fx.fixed_ratio_mc = 1;
  PipelinePlan fp = pipeline_simulate(m, a, fx);
  CHECK(fp.ratio_cc == 2);
  CHECK(fp.ratio_mc == 1);
}

TEST_CASE("batch scaling: serial stage 1, shared-weight stage 2") {
  ArchConfig a = test_arch();
  ModelConfig m;
  Scenario s1 = short_scenario(16, 1);
  s1.policy = BandwidthPolicy::fixed;  // pin the split so times are comparable
  Scenario s2 = s1;
  s2.batch = 2;
  Scenario s16 = s1;
  s16.batch = 16;

  PipelinePlan p1 = pipeline_simulate(m, a, s1);
  PipelinePlan p2 = pipeline_simulate(m, a, s2);
  PipelinePlan p16 = pipeline_simulate(m, a, s16);
  CHECK(p2.stage1_cycles == doctest::Approx(2 * p1.stage1_cycles).epsilon(1e-12));
  CHECK(p16.stage1_cycles == doctest::Approx(16 * p1.stage1_cycles).epsilon(1e-12));
  CHECK(p16.stage2_cycles < 16 * p1.stage2_cycles);  // weights fetched once
  CHECK(p16.stage2_cycles >= p1.stage2_cycles);      // but more rows to push
}

TEST_CASE("pruning shrinks decode traffic and never helps stage 1") {
  ArchConfig a = test_arch();
  ModelConfig m;
  Scenario dense = short_scenario(16);
  dense.policy = BandwidthPolicy::fixed;
  Scenario pruned = dense;
  pruned.prune.enabled = true;
  pruned.prune.uniform_ratio = 0.5;

  PipelinePlan pd = pipeline_simulate(m, a, dense);
  PipelinePlan pp = pipeline_simulate(m, a, pruned);
  CHECK(pp.pruned);
  CHECK(pp.mean_prune_ratio_vx == doctest::Approx(0.5));
  CHECK(pp.mean_prune_ratio_vd == 0.0);  // vd pruning stays off by default
  CHECK(pp.decode.dram_bytes < pd.decode.dram_bytes);
  CHECK(pp.stage2_cycles < pd.stage2_cycles);
  CHECK(pp.stage1_cycles == doctest::Approx(pd.stage1_cycles).epsilon(1e-12));

  Scenario vd = pruned;
  vd.prune.prune_vd = true;
  PipelinePlan pv = pipeline_simulate(m, a, vd);
  CHECK(pv.mean_prune_ratio_vd == doctest::Approx(0.5));
  CHECK(pv.decode.dram_bytes < pp.decode.dram_bytes);

  Scenario no_ratio = dense;
  no_ratio.prune.enabled = true;  // uniform_ratio stays unset
  CHECK_THROWS_AS(pipeline_simulate(m, a, no_ratio), std::runtime_error);

  std::vector<double> wrong(3, 0.2);
  CHECK_THROWS_AS(pipeline_simulate(m, a, pruned, wrong, {}), std::invalid_argument);

  // Per-layer spans override the uniform setting.
  std::vector<double> per_layer(22, 0.0);
  per_layer[21] = 0.44;
  PipelinePlan pl = pipeline_simulate(m, a, pruned, per_layer, per_layer);
  CHECK(pl.mean_prune_ratio_vx == doctest::Approx(0.02));
  CHECK(pl.decode.dram_bytes > pp.decode.dram_bytes);
}

TEST_CASE("bandwidth allocation dominates the equal split") {
  ArchConfig a = test_arch();
  ModelConfig m;
  Scenario s = short_scenario();
  const std::pair<int, int> equal_only[] = {{1, 1}};
  for (uint64_t l : {1u, 8u, 64u, 256u}) {
    AllocationChoice best = allocate_bandwidth(l, m, a, s);
    AllocationChoice eq = allocate_bandwidth(l, m, a, s, equal_only);
    CHECK(best.period_cycles <= eq.period_cycles * (1 + 1e-12));
    CHECK(best.period_cycles > 0);
    AllocationChoice again = allocate_bandwidth(l, m, a, s);
    CHECK(again.c == best.c);
    CHECK(again.m == best.m);
    CHECK(again.period_cycles == best.period_cycles);
  }
  CHECK_THROWS_AS(allocate_bandwidth(0, m, a, s), std::invalid_argument);

  // Long generations pull bandwidth toward decode, short ones toward prefill.
  AllocationChoice short_l = allocate_bandwidth(1, m, a, s);
  AllocationChoice long_l = allocate_bandwidth(1024, m, a, s);
  CHECK(double(long_l.m) / long_l.c >= double(short_l.m) / short_l.c);
}

TEST_CASE("balance lengths are finite and ordered") {
  ArchConfig a = test_arch();
  ModelConfig m;
  Scenario s = short_scenario();
  BalancePoints bp = balance_length(m, a, s);
  CHECK(bp.l_e >= 1);
  CHECK(bp.l_e < 4096);
  CHECK(bp.l_b >= 1);
  CHECK(bp.l_b < 4096);
  // Two serialized stage-1 passes on a thin slice take longer than one on
  // half the link, so the crossover cannot come earlier.
  CHECK(bp.l_b >= bp.l_e);
}

TEST_CASE("homogeneous rebuilds preserve the core count") {
  ArchConfig a = test_arch();
  ArchConfig cc = make_homogeneous(a, ClusterKind::compute_centric);
  CHECK(cc.total_mc_clusters() == 0);
  CHECK(cc.cc_clusters_per_group == 3);
  CHECK(cc.total_cc_cores() == 48);
  ArchConfig mc = make_homogeneous(a, ClusterKind::memory_centric);
  CHECK(mc.total_cc_clusters() == 0);
  CHECK(mc.mc_clusters_per_group == 6);
  CHECK(mc.total_mc_cores() == 48);

  ArchConfig odd = a;
  odd.mc_cluster.cores = 3;  // 56 cores split into 16- or 12-core groups
  CHECK_THROWS_AS(make_homogeneous(odd, ClusterKind::compute_centric), std::invalid_argument);
  CHECK_THROWS_AS(make_homogeneous(odd, ClusterKind::memory_centric), std::invalid_argument);
}

TEST_CASE("cluster benchmarks land in the expected regimes") {
  ArchConfig a = test_arch();
  ModelConfig m;
  ClusterBenchmark b = cluster_benchmarks(m, a);
  CHECK(b.gemm_cc_cycles == 1413120.0);  // one cluster, compute-bound
  CHECK(b.gemm_mc_over_cc() > 3.0);
  CHECK(b.gemm_mc_over_cc() < 6.0);
  // Both GEMVs are wire-bound at the per-cluster share (336/16 = 21 B/cycle),
  // so the ratio is the transfer-overhead gap between 16 KiB and macro-sized
  // chunks.
  CHECK(b.gemv_cc_cycles == doctest::Approx(21004288.0 / 21.0).epsilon(1e-12));
  CHECK(b.gemv_mc_cycles == doctest::Approx(8986624.0 / 21.0).epsilon(1e-12));
  CHECK(b.gemv_cc_over_mc() == doctest::Approx(21004288.0 / 8986624.0).epsilon(1e-12));

  ArchConfig no_mc = make_homogeneous(a, ClusterKind::compute_centric);
  CHECK_THROWS_AS(cluster_benchmarks(m, no_mc), std::invalid_argument);
}

TEST_CASE("chip comparison favors the split design on decode-heavy serving") {
  ArchConfig a = test_arch();
  ModelConfig m;
  Scenario s;
  s.mode = ScenarioMode::compare;
  s.input_tokens = 730;
  s.encoder_tokens = 2880;
  s.output_tokens = 32;
  s.batch = 1;

  CompareResult res = compare_homo_hetero(m, a, s);
  REQUIRE(res.rows.size() == 3);
  const CompareRow& het = res.row("hetero");
  const CompareRow& hcc = res.row("homo-cc");
  const CompareRow& hmc = res.row("homo-mc");
  CHECK_THROWS_AS(res.row("gpu"), std::runtime_error);

  // Phase capability: arrays win prefill-shaped work, macros win decode.
  CHECK(hcc.encode_ms < het.encode_ms);
  CHECK(het.encode_ms < hmc.encode_ms);
  CHECK(hcc.prefill_ms < het.prefill_ms);
  CHECK(het.prefill_ms < hmc.prefill_ms);
  CHECK(hmc.decode_ms <= het.decode_ms * (1 + 1e-9));
  CHECK(het.decode_ms < hcc.decode_ms);

  // Deployed end-to-end, the mixed chip beats both single-kind rebuilds.
  CHECK(het.total_ms < hcc.total_ms);
  CHECK(het.total_ms < hmc.total_ms);
  CHECK(het.configuration.find("stages cc|mc") == 0);
  CHECK(!hcc.configuration.empty());
  CHECK(!hmc.configuration.empty());
  for (const CompareRow& r : res.rows) {
    CHECK(r.encode_ms > 0);
    CHECK(r.prefill_ms > 0);
    CHECK(r.decode_ms > 0);
    CHECK(r.total_ms > 0);
  }
  CHECK(res.bench.gemm_cc_cycles == 1413120.0);
}
