#pragma once

#include <span>
#include <string>
#include <vector>

#include "hetsim/arch.h"
#include "hetsim/memsys.h"
#include "hetsim/workload.h"

namespace hetsim {

// A set of same-kind clusters acting as one pipeline stage.
struct StagePool {
  const ArchConfig* arch = nullptr;
  ClusterKind kind = ClusterKind::compute_centric;
  int clusters = 0;

  const ClusterSpec& cluster() const;
  int total_cores() const;
  uint64_t stream_chunk_bytes() const;
};

// Candidate stage-1:stage-2 bandwidth ratios tried by the allocator, most
// decode-favoring first.  Ties in the resulting period resolve toward the
// most balanced ratio.
std::span<const std::pair<int, int>> default_ratio_set();

// Splits the DRAM link between two stage pools in c:m proportion; each
// pool's clusters share its stage's slice via their per-cluster budgets.
struct BandwidthSplit {
  double stage1_bytes_per_cycle = 0;
  double stage2_bytes_per_cycle = 0;
};
BandwidthSplit split_bandwidth(const ArchConfig& arch, int stage1_clusters, int stage2_clusters,
                               int c, int m);

// Roofline time of one kernel on a pool: max(coprocessor busy cycles, DMA
// cycles at the granted bandwidth).
double kernel_time_cycles(const Kernel& kn, const StagePool& pool, double bytes_per_cycle);

double stage_latency(std::span<const Kernel> kernels, const StagePool& pool,
                     double bytes_per_cycle);

// Cumulative decode-stage cycles: entry [i] is the time of the first i
// decode iterations at the given bandwidth, so any output length l <= the
// built graph's length can be costed by one lookup.
std::vector<double> decode_time_prefix(const OperatorGraph& g, const StagePool& pool,
                                       double bytes_per_cycle);

struct BalancePoints {
  uint64_t l_e = 0;  // output length where decode catches up with encode+prefill
  uint64_t l_b = 0;  // output length past which a second stream rides for free
};

// Stage-balance lengths at the equal bandwidth split (l_e) and, for l_b, at
// the most decode-favoring split with two interleaved streams.
BalancePoints balance_length(const ModelConfig& model, const ArchConfig& arch,
                             const Scenario& scen);

struct AllocationChoice {
  int c = 1, m = 1;
  BandwidthBudget budget;
  double period_cycles = 0;
};

// Picks the per-cluster budget ratio minimizing the steady-state pipeline
// period for output length l; always at least as good as the equal split.
AllocationChoice allocate_bandwidth(uint64_t l, const ModelConfig& model, const ArchConfig& arch,
                                    const Scenario& scen,
                                    std::span<const std::pair<int, int>> ratios = {});

struct PhaseBreakdown {
  double cycles = 0;
  uint64_t dram_bytes = 0;
  double utilization = 0;
};

struct PipelinePlan {
  int ratio_cc = 1, ratio_mc = 1;
  BandwidthBudget budget;
  double stage1_cycles = 0;  // encode+prefill for the whole batch
  double stage2_cycles = 0;  // decode
  double period_cycles = 0;
  double latency_cycles = 0;
  double tokens_per_s = 0;
  PhaseBreakdown encode, prefill, decode;
  bool pruned = false;
  double mean_prune_ratio_vx = 0;
  double mean_prune_ratio_vd = 0;
};

// Two-stage stream pipeline: encode+prefill on the compute-centric pool,
// decode on the memory-centric pool.  Batched requests serialize through
// stage 1 and share decode weight fetches in stage 2.  Per-layer prune
// ratios (when the scenario enables pruning) shrink decode FFN traffic.
PipelinePlan pipeline_simulate(const ModelConfig& model, const ArchConfig& arch,
                               const Scenario& scen, std::span<const double> ratio_vx = {},
                               std::span<const double> ratio_vd = {});

// Single-cluster reference kernels used for calibration and comparison: a
// prefill-shaped GEMM with the whole link (array capability) and a
// decode-shaped GEMV at a per-cluster link share (streaming efficiency
// under phase-wide contention).
struct ClusterBenchmark {
  double gemm_cc_cycles = 0, gemm_mc_cycles = 0;
  double gemv_cc_cycles = 0, gemv_mc_cycles = 0;
  double gemm_mc_over_cc() const { return gemm_mc_cycles / gemm_cc_cycles; }
  double gemv_cc_over_mc() const { return gemv_cc_cycles / gemv_mc_cycles; }
};

ClusterBenchmark cluster_benchmarks(const ModelConfig& model, const ArchConfig& arch);

// Rebuilds the chip with a single cluster kind at the same total core count.
ArchConfig make_homogeneous(const ArchConfig& arch, ClusterKind kind);

struct CompareRow {
  std::string variant;       // "hetero", "homo-cc", "homo-mc"
  double encode_ms = 0;      // phase capability: all clusters, full link
  double prefill_ms = 0;
  double decode_ms = 0;
  double total_ms = 0;       // best deployment: min period over splits/ratios
  std::string configuration; // chosen split and budget ratio
};

struct CompareResult {
  std::vector<CompareRow> rows;
  ClusterBenchmark bench;
  const CompareRow& row(const std::string& variant) const;
};

// Evaluates the shipped chip against same-core-count homogeneous rebuilds on
// one scenario.  Homogeneous variants search stage splits (k vs n-k
// clusters, or fully sequential) and budget ratios; the heterogeneous chip
// keeps its phase-affine stages and searches ratios only.
CompareResult compare_homo_hetero(const ModelConfig& model, const ArchConfig& arch,
                                  const Scenario& scen);

}  // namespace hetsim
