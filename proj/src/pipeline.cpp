#include "hetsim/pipeline.h"

#include <algorithm>
#include <array>
#include <cmath>
#include <stdexcept>

#include "hetsim/coproc.h"
#include "hetsim/pruning.h"

namespace hetsim {

namespace {

void require(bool cond, const char* msg) {
  if (!cond) throw std::invalid_argument(msg);
}

constexpr uint64_t benchmark_rows = 300;  // prefill-shaped GEMM height

constexpr std::array<std::pair<int, int>, 9> ratio_set = {{
    {1, 7}, {1, 4}, {1, 3}, {1, 2}, {1, 1}, {2, 1}, {3, 1}, {4, 1}, {7, 1},
}};

double balance_score(int c, int m) { return std::fabs(std::log(double(c) / double(m))); }

}  // namespace

const ClusterSpec& StagePool::cluster() const {
  return kind == ClusterKind::compute_centric ? arch->cc_cluster : arch->mc_cluster;
}

int StagePool::total_cores() const { return clusters * cluster().cores; }

uint64_t StagePool::stream_chunk_bytes() const {
  return kind == ClusterKind::compute_centric ? arch->cc_stream_chunk_bytes()
                                              : arch->mc_stream_chunk_bytes();
}

std::span<const std::pair<int, int>> default_ratio_set() { return ratio_set; }

BandwidthSplit split_bandwidth(const ArchConfig& arch, int stage1_clusters, int stage2_clusters,
                               int c, int m) {
  require(stage1_clusters >= 1 && stage2_clusters >= 1, "split_bandwidth: empty stage pool");
  require(c >= 1 && m >= 1, "split_bandwidth: ratio parts must be >= 1");
  BandwidthSplit out;
  double link = arch.bytes_per_cycle();
  out.stage1_bytes_per_cycle = link * double(c) / double(c + m);
  out.stage2_bytes_per_cycle = link * double(m) / double(c + m);
  return out;
}

double kernel_time_cycles(const Kernel& kn, const StagePool& pool, double bytes_per_cycle) {
  require(pool.arch != nullptr && pool.clusters >= 1, "kernel_time_cycles: empty pool");
  CycleReport rep;
  switch (kn.kind) {
    case KernelKind::gemm:
    case KernelKind::gemv:
      rep = pool.kind == ClusterKind::compute_centric
                ? map_gemm_sa(kn, pool.cluster().sa(), pool.total_cores())
                : map_gemm_cim(kn, pool.cluster().cim(), pool.total_cores());
      break;
    case KernelKind::elementwise:
    case KernelKind::softmax:
      rep = map_vector(kn, pool.total_cores());
      break;
  }
  double mem = phase_memory_cycles(kn.dram_bytes(), bytes_per_cycle, pool.stream_chunk_bytes(),
                                   pool.arch->dma_overhead_bytes);
  return std::max(double(rep.compute_cycles), mem);
}

double stage_latency(std::span<const Kernel> kernels, const StagePool& pool,
                     double bytes_per_cycle) {
  double total = 0;
  for (const Kernel& kn : kernels) total += kernel_time_cycles(kn, pool, bytes_per_cycle);
  return total;
}

namespace {

// Bandwidth-independent kernel costs: coprocessor cycles plus wire bytes
// (payload + per-transfer overhead), so sweeping allocation ratios never
// re-walks the mapping logic.
struct KernelCost {
  double comp = 0;
  double wire = 0;
};

KernelCost kernel_cost(const Kernel& kn, const StagePool& pool) {
  KernelCost kc;
  CycleReport rep;
  switch (kn.kind) {
    case KernelKind::gemm:
    case KernelKind::gemv:
      rep = pool.kind == ClusterKind::compute_centric
                ? map_gemm_sa(kn, pool.cluster().sa(), pool.total_cores())
                : map_gemm_cim(kn, pool.cluster().cim(), pool.total_cores());
      break;
    default:
      rep = map_vector(kn, pool.total_cores());
      break;
  }
  kc.comp = double(rep.compute_cycles);
  uint64_t bytes = kn.dram_bytes();
  if (bytes > 0) {
    uint64_t chunk = pool.stream_chunk_bytes();
    require(chunk > 0, "kernel_cost: pool has no stream buffer");
    uint64_t transfers = (bytes + chunk - 1) / chunk;
    kc.wire = double(bytes) + double(transfers) * double(pool.arch->dma_overhead_bytes);
  }
  return kc;
}

double costs_time(std::span<const KernelCost> costs, double bpc) {
  double total = 0;
  for (const KernelCost& kc : costs) total += std::max(kc.comp, kc.wire / bpc);
  return total;
}

// Precomputed stage costs for one scenario graph on a fixed pool pair.
struct PipelineCosts {
  std::vector<KernelCost> stage1;                 // encode + prefill, one request
  std::vector<KernelCost> decode;                 // all decode kernels
  std::vector<size_t> iter_start;                 // offsets into `decode`
  std::vector<KernelCost> encode_only;
  std::vector<KernelCost> prefill_only;

  double stage1_time(double bpc) const { return costs_time(stage1, bpc); }

  std::vector<double> decode_prefix(double bpc) const {
    std::vector<double> prefix(iter_start.size() + 1, 0.0);
    size_t iter = 0;
    double acc = 0;
    for (size_t i = 0; i < decode.size(); i++) {
      while (iter + 1 < iter_start.size() && i == iter_start[iter + 1]) prefix[++iter] = acc;
      acc += std::max(decode[i].comp, decode[i].wire / bpc);
    }
    while (iter + 1 < iter_start.size()) prefix[++iter] = acc;
    prefix[iter_start.size()] = acc;
    return prefix;
  }
};

PipelineCosts build_costs(const OperatorGraph& g, const StagePool& cc_pool,
                          const StagePool& mc_pool) {
  PipelineCosts pc;
  size_t stage1_end = g.encode_count + g.prefill_count;
  for (size_t i = 0; i < stage1_end; i++) {
    KernelCost kc = kernel_cost(g.kernels[i], cc_pool);
    pc.stage1.push_back(kc);
    (i < g.encode_count ? pc.encode_only : pc.prefill_only).push_back(kc);
  }
  pc.iter_start.reserve(g.decode_iter_start.size());
  for (size_t s : g.decode_iter_start) pc.iter_start.push_back(s - stage1_end);
  for (size_t i = stage1_end; i < g.kernels.size(); i++)
    pc.decode.push_back(kernel_cost(g.kernels[i], mc_pool));
  return pc;
}

StagePool cc_pool_of(const ArchConfig& a) {
  return {&a, ClusterKind::compute_centric, a.total_cc_clusters()};
}
StagePool mc_pool_of(const ArchConfig& a) {
  return {&a, ClusterKind::memory_centric, a.total_mc_clusters()};
}

BandwidthBudget budget_for(const ArchConfig& a, const BandwidthSplit& split) {
  BandwidthBudget b;
  b.interval_cycles = a.throttle_interval_cycles;
  double t = double(a.throttle_interval_cycles);
  if (a.total_cc_clusters() > 0)
    b.cc_bytes_per_interval =
        uint64_t(std::llround(split.stage1_bytes_per_cycle * t / a.total_cc_clusters()));
  if (a.total_mc_clusters() > 0)
    b.mc_bytes_per_interval =
        uint64_t(std::llround(split.stage2_bytes_per_cycle * t / a.total_mc_clusters()));
  return b;
}

std::vector<double> resolve_ratios(const Scenario& scen, int layers, bool vd,
                                   std::span<const double> provided) {
  if (!scen.prune.enabled) return {};
  if (!provided.empty()) {
    require(provided.size() == size_t(layers), "pipeline: prune ratio count != llm layers");
    return {provided.begin(), provided.end()};
  }
  if (scen.prune.uniform_ratio >= 0.0)
    return std::vector<double>(layers, vd && !scen.prune.prune_vd ? 0.0 : scen.prune.uniform_ratio);
  throw std::runtime_error(
      "pipeline: pruning enabled but no ratios available (set scenario.prune.ratio or "
      "scenario.prune.trace)");
}

}  // namespace

std::vector<double> decode_time_prefix(const OperatorGraph& g, const StagePool& pool,
                                       double bytes_per_cycle) {
  require(pool.arch != nullptr && pool.clusters >= 1, "decode_time_prefix: empty pool");
  StagePool stage1 = pool.arch->total_cc_clusters() >= 1 ? cc_pool_of(*pool.arch) : pool;
  PipelineCosts pc = build_costs(g, stage1, pool);
  return pc.decode_prefix(bytes_per_cycle);
}

PipelinePlan pipeline_simulate(const ModelConfig& model, const ArchConfig& arch,
                               const Scenario& scen, std::span<const double> ratio_vx,
                               std::span<const double> ratio_vd) {
  require(arch.total_cc_clusters() >= 1 && arch.total_mc_clusters() >= 1,
          "pipeline_simulate: needs both cluster kinds");

  OperatorGraph graph = build_graph(model, scen);
  PipelinePlan plan;
  if (scen.prune.enabled) {
    std::vector<double> rvx = resolve_ratios(scen, model.llm_layers, false, ratio_vx);
    std::vector<double> rvd = resolve_ratios(scen, model.llm_layers, true, ratio_vd);
    graph = traffic_reduction(graph, rvx, rvd, scen.prune.prune_vd);
    plan.pruned = true;
    for (double r : rvx) plan.mean_prune_ratio_vx += r;
    for (double r : rvd) plan.mean_prune_ratio_vd += r;
    plan.mean_prune_ratio_vx /= model.llm_layers;
    plan.mean_prune_ratio_vd /= model.llm_layers;
  }

  StagePool cc = cc_pool_of(arch);
  StagePool mc = mc_pool_of(arch);
  PipelineCosts costs = build_costs(graph, cc, mc);
  double batch = double(scen.batch);
  uint64_t l = scen.output_tokens;

  auto period_at = [&](int c, int m, double* s1_out, double* s2_out) {
    BandwidthSplit split = split_bandwidth(arch, cc.clusters, mc.clusters, c, m);
    double s1 = batch * costs.stage1_time(split.stage1_bytes_per_cycle);
    double s2 = costs.decode_prefix(split.stage2_bytes_per_cycle)[l];
    if (s1_out) *s1_out = s1;
    if (s2_out) *s2_out = s2;
    return std::max(s1, s2);
  };

  int best_c = 1, best_m = 1;
  if (scen.policy == BandwidthPolicy::fixed) {
    best_c = scen.fixed_ratio_cc;
    best_m = scen.fixed_ratio_mc;
  } else if (scen.policy == BandwidthPolicy::dynamic) {
    double best_period = 0;
    bool first = true;
    for (auto [c, m] : ratio_set) {
      double p = period_at(c, m, nullptr, nullptr);
      bool better = first || p < best_period * (1.0 - 1e-12);
      bool tie = !first && std::fabs(p - best_period) <= best_period * 1e-12;
      if (better || (tie && balance_score(c, m) < balance_score(best_c, best_m))) {
        best_period = p;
        best_c = c;
        best_m = m;
      }
      first = false;
    }
  }

  plan.ratio_cc = best_c;
  plan.ratio_mc = best_m;
  BandwidthSplit split = split_bandwidth(arch, cc.clusters, mc.clusters, best_c, best_m);
  plan.budget = budget_for(arch, split);
  plan.period_cycles = period_at(best_c, best_m, &plan.stage1_cycles, &plan.stage2_cycles);
  plan.latency_cycles = plan.stage1_cycles + plan.stage2_cycles;
  plan.tokens_per_s = batch * double(l) * arch.clock_hz / plan.period_cycles;

  plan.encode.cycles = batch * costs_time(costs.encode_only, split.stage1_bytes_per_cycle);
  plan.prefill.cycles = batch * costs_time(costs.prefill_only, split.stage1_bytes_per_cycle);
  plan.decode.cycles = plan.stage2_cycles;
  PhaseTotals te = graph.totals(Phase::encode), tp = graph.totals(Phase::prefill),
              td = graph.totals(Phase::decode);
  plan.encode.dram_bytes = te.dram_bytes() * scen.batch;
  plan.prefill.dram_bytes = tp.dram_bytes() * scen.batch;
  plan.decode.dram_bytes = td.dram_bytes();
  double cc_macs = double(cc.total_cores()) * double(arch.cc_cluster.sa().macs_per_cycle());
  double mc_macs = double(mc.total_cores()) * arch.mc_cluster.cim().macs_per_cycle();
  if (plan.encode.cycles > 0)
    plan.encode.utilization = batch * double(te.flops) / 2.0 / cc_macs / plan.encode.cycles;
  if (plan.prefill.cycles > 0)
    plan.prefill.utilization = batch * double(tp.flops) / 2.0 / cc_macs / plan.prefill.cycles;
  if (plan.decode.cycles > 0)
    plan.decode.utilization = double(td.flops) / 2.0 / mc_macs / plan.decode.cycles;
  return plan;
}

BalancePoints balance_length(const ModelConfig& model, const ArchConfig& arch,
                             const Scenario& scen) {
  require(arch.total_cc_clusters() >= 1 && arch.total_mc_clusters() >= 1,
          "balance_length: needs both cluster kinds");
  constexpr uint64_t search_cap = 4096;
  Scenario s1 = scen;
  s1.batch = 1;
  s1.output_tokens = search_cap;
  s1.prune.enabled = false;

  StagePool cc = cc_pool_of(arch), mc = mc_pool_of(arch);
  OperatorGraph g1 = build_graph(model, s1);
  PipelineCosts c1 = build_costs(g1, cc, mc);

  BalancePoints bp;
  // l_e compares the stages under the pre-management equal split.
  BandwidthSplit eq = split_bandwidth(arch, cc.clusters, mc.clusters, 1, 1);
  double stage1 = c1.stage1_time(eq.stage1_bytes_per_cycle);
  std::vector<double> prefix = c1.decode_prefix(eq.stage2_bytes_per_cycle);
  bp.l_e = search_cap;
  for (uint64_t l = 1; l <= search_cap; l++)
    if (prefix[l] >= stage1) {
      bp.l_e = l;
      break;
    }

  // l_b: with the most decode-favoring ratio, the length where a second
  // interleaved stream no longer stretches the period (decode stays the
  // bottleneck even against two stage-1 passes).
  Scenario s2 = s1;
  s2.batch = 2;
  OperatorGraph g2 = build_graph(model, s2);
  PipelineCosts c2 = build_costs(g2, cc, mc);
  auto [c_fav, m_fav] = ratio_set.front();
  BandwidthSplit fav = split_bandwidth(arch, cc.clusters, mc.clusters, c_fav, m_fav);
  double stage1_two = 2.0 * c2.stage1_time(fav.stage1_bytes_per_cycle);
  std::vector<double> prefix2 = c2.decode_prefix(fav.stage2_bytes_per_cycle);
  bp.l_b = search_cap;
  for (uint64_t l = 1; l <= search_cap; l++)
    if (prefix2[l] >= stage1_two) {
      bp.l_b = l;
      break;
    }
  return bp;
}

AllocationChoice allocate_bandwidth(uint64_t l, const ModelConfig& model, const ArchConfig& arch,
                                    const Scenario& scen,
                                    std::span<const std::pair<int, int>> ratios) {
  require(l >= 1, "allocate_bandwidth: l must be >= 1");
  if (ratios.empty()) ratios = default_ratio_set();
  Scenario s = scen;
  s.output_tokens = l;
  s.policy = BandwidthPolicy::dynamic;
  s.prune.enabled = false;

  StagePool cc = cc_pool_of(arch), mc = mc_pool_of(arch);
  OperatorGraph g = build_graph(model, s);
  PipelineCosts costs = build_costs(g, cc, mc);

  AllocationChoice best;
  bool first = true;
  for (auto [c, m] : ratios) {
    BandwidthSplit split = split_bandwidth(arch, cc.clusters, mc.clusters, c, m);
    double s1 = double(s.batch) * costs.stage1_time(split.stage1_bytes_per_cycle);
    double s2 = costs.decode_prefix(split.stage2_bytes_per_cycle)[l];
    double p = std::max(s1, s2);
    bool better = first || p < best.period_cycles * (1.0 - 1e-12);
    bool tie = !first && std::fabs(p - best.period_cycles) <= best.period_cycles * 1e-12;
    if (better || (tie && balance_score(c, m) < balance_score(best.c, best.m))) {
      best.c = c;
      best.m = m;
      best.period_cycles = p;
      best.budget = budget_for(arch, split);
    }
    first = false;
  }
  return best;
}

ClusterBenchmark cluster_benchmarks(const ModelConfig& model, const ArchConfig& arch) {
  require(arch.total_cc_clusters() >= 1 && arch.total_mc_clusters() >= 1,
          "cluster_benchmarks: needs both cluster kinds");
  uint64_t d = model.d_model;
  Kernel gemm;
  gemm.kind = KernelKind::gemm;
  gemm.name = "bench_gemm";
  gemm.m = benchmark_rows;
  gemm.k = d;
  gemm.n = d;
  gemm.weight_bytes = d * d * model.weight_bytes_per_elem;
  gemm.act_bytes = benchmark_rows * d * model.act_bytes_per_elem;
  gemm.out_bytes = benchmark_rows * d * model.act_bytes_per_elem;
  gemm.flops = 2 * benchmark_rows * d * d;

  Kernel gemv = gemm;
  gemv.kind = KernelKind::gemv;
  gemv.name = "bench_gemv";
  gemv.m = 1;
  gemv.act_bytes = d * model.act_bytes_per_elem;
  gemv.out_bytes = d * model.act_bytes_per_elem;
  gemv.flops = 2 * d * d;

  StagePool cc{&arch, ClusterKind::compute_centric, 1};
  StagePool mc{&arch, ClusterKind::memory_centric, 1};
  ClusterBenchmark b;
  // The GEMM benchmark isolates array capability (a lone cluster sees the
  // whole link); the GEMV benchmark measures streaming efficiency under the
  // per-cluster link share it would get in a busy decode phase.
  double full = arch.bytes_per_cycle();
  double share = arch.bytes_per_cycle() / arch.total_clusters();
  b.gemm_cc_cycles = kernel_time_cycles(gemm, cc, full);
  b.gemm_mc_cycles = kernel_time_cycles(gemm, mc, full);
  b.gemv_cc_cycles = kernel_time_cycles(gemv, cc, share);
  b.gemv_mc_cycles = kernel_time_cycles(gemv, mc, share);
  return b;
}

ArchConfig make_homogeneous(const ArchConfig& arch, ClusterKind kind) {
  ArchConfig out = arch;
  int total_cores = arch.total_cc_cores() + arch.total_mc_cores();
  const ClusterSpec& keep =
      kind == ClusterKind::compute_centric ? arch.cc_cluster : arch.mc_cluster;
  int per_group_cores = keep.cores * arch.groups;
  require(total_cores % per_group_cores == 0,
          "make_homogeneous: core count does not divide into equal groups");
  int clusters_per_group = total_cores / per_group_cores;
  if (kind == ClusterKind::compute_centric) {
    out.cc_clusters_per_group = clusters_per_group;
    out.mc_clusters_per_group = 0;
  } else {
    out.mc_clusters_per_group = clusters_per_group;
    out.cc_clusters_per_group = 0;
  }
  return out;
}

const CompareRow& CompareResult::row(const std::string& variant) const {
  for (const CompareRow& r : rows)
    if (r.variant == variant) return r;
  throw std::runtime_error("compare: no variant '" + variant + "'");
}

namespace {

// Best deployment of a homogeneous chip: try every stage split k | n-k with
// every budget ratio, plus the fully sequential whole-chip schedule.
struct HomoPlan {
  double period_cycles = 0;
  std::string configuration;
};

HomoPlan best_homo_plan(const OperatorGraph& g, const ArchConfig& homo, ClusterKind kind,
                        double batch, uint64_t l) {
  int n = homo.groups * (kind == ClusterKind::compute_centric ? homo.cc_clusters_per_group
                                                              : homo.mc_clusters_per_group);
  HomoPlan best;
  bool first = true;
  for (int k = 1; k < n; k++) {
    StagePool p1{&homo, kind, k};
    StagePool p2{&homo, kind, n - k};
    PipelineCosts costs = build_costs(g, p1, p2);
    for (auto [c, m] : ratio_set) {
      BandwidthSplit split = split_bandwidth(homo, k, n - k, c, m);
      double s1 = batch * costs.stage1_time(split.stage1_bytes_per_cycle);
      double s2 = costs.decode_prefix(split.stage2_bytes_per_cycle)[l];
      double p = std::max(s1, s2);
      if (first || p < best.period_cycles) {
        best.period_cycles = p;
        best.configuration = "split " + std::to_string(k) + "|" + std::to_string(n - k) +
                             " ratio " + std::to_string(c) + ":" + std::to_string(m);
        first = false;
      }
    }
  }
  // Sequential: all clusters run each phase in turn, full link each time.
  StagePool all{&homo, kind, n};
  PipelineCosts costs = build_costs(g, all, all);
  double link = homo.bytes_per_cycle();
  double seq = batch * (costs.stage1_time(link) + costs.decode_prefix(link)[l] / batch);
  if (first || seq < best.period_cycles) {
    best.period_cycles = seq;
    best.configuration = "sequential";
  }
  return best;
}

}  // namespace

CompareResult compare_homo_hetero(const ModelConfig& model, const ArchConfig& arch,
                                  const Scenario& scen) {
  Scenario s = scen;
  s.prune.enabled = false;  // capability comparison runs dense
  OperatorGraph g = build_graph(model, s);
  double batch = double(s.batch);
  uint64_t l = s.output_tokens;
  double to_ms = 1e3 / arch.clock_hz;

  CompareResult res;
  res.bench = cluster_benchmarks(model, arch);
  double link = arch.bytes_per_cycle();

  // Phase capability per variant: every cluster on that phase, full link.
  auto phase_times = [&](const ArchConfig& a, ClusterKind kind, int clusters, CompareRow& row) {
    StagePool all{&a, kind, clusters};
    PipelineCosts costs = build_costs(g, all, all);
    row.encode_ms = batch * costs_time(costs.encode_only, link) * to_ms;
    row.prefill_ms = batch * costs_time(costs.prefill_only, link) * to_ms;
    row.decode_ms = costs.decode_prefix(link)[l] * to_ms;
  };

  {
    CompareRow row;
    row.variant = "hetero";
    StagePool cc = cc_pool_of(arch), mc = mc_pool_of(arch);
    PipelineCosts costs = build_costs(g, cc, mc);
    row.encode_ms = batch * costs_time(costs.encode_only, link) * to_ms;
    row.prefill_ms = batch * costs_time(costs.prefill_only, link) * to_ms;
    row.decode_ms = costs.decode_prefix(link)[l] * to_ms;
    Scenario sd = s;
    sd.policy = BandwidthPolicy::dynamic;
    PipelinePlan plan = pipeline_simulate(model, arch, sd);
    row.total_ms = plan.period_cycles * to_ms;
    row.configuration = "stages cc|mc ratio " + std::to_string(plan.ratio_cc) + ":" +
                        std::to_string(plan.ratio_mc);
    res.rows.push_back(row);
  }
  {
    CompareRow row;
    row.variant = "homo-cc";
    ArchConfig homo = make_homogeneous(arch, ClusterKind::compute_centric);
    phase_times(homo, ClusterKind::compute_centric, homo.total_cc_clusters(), row);
    HomoPlan plan = best_homo_plan(g, homo, ClusterKind::compute_centric, batch, l);
    row.total_ms = plan.period_cycles * to_ms;
    row.configuration = plan.configuration;
    res.rows.push_back(row);
  }
  {
    CompareRow row;
    row.variant = "homo-mc";
    ArchConfig homo = make_homogeneous(arch, ClusterKind::memory_centric);
    phase_times(homo, ClusterKind::memory_centric, homo.total_mc_clusters(), row);
    HomoPlan plan = best_homo_plan(g, homo, ClusterKind::memory_centric, batch, l);
    row.total_ms = plan.period_cycles * to_ms;
    row.configuration = plan.configuration;
    res.rows.push_back(row);
  }
  return res;
}

}  // namespace hetsim
