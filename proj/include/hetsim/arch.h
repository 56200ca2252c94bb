#pragma once

#include <cstdint>
#include <string>
#include <variant>
#include <vector>

#include "hetsim/config.h"

namespace hetsim {

// Weight-stationary systolic array attached to a compute-centric core.
// rows x cols MAC grid; matrix_registers double-buffers weight tiles so the
// next tile loads while the current one drains.
struct SaSpec {
  int rows = 16;
  int cols = 16;
  int matrix_registers = 4;
  int operand_bits = 16;

  int64_t macs_per_cycle() const { return int64_t(rows) * cols; }
};

// Digital compute-in-memory SRAM macro attached to a memory-centric core.
// Activations are fed bit-serially: one multiply pass over a weight column
// set takes act_bits cycles plus one cycle for the accumulator drain.
struct CimSpec {
  int cols = 32;             // column groups that produce one output each
  int subarrays_per_col = 44;  // bitcell subarrays reduced by the adder tree
  int depth = 256;           // weight rows per subarray (resident matrix rows)
  int weight_bits = 16;
  int act_bits = 16;         // serial-bit count per activation pass

  int64_t capacity_weights() const {
    return int64_t(depth) * subarrays_per_col * cols;
  }
  int64_t macro_bytes() const { return capacity_weights() * weight_bits / 8; }
  // One pass performs subarrays_per_col * cols MACs in act_bits cycles.
  double macs_per_cycle() const {
    return double(subarrays_per_col) * cols / act_bits;
  }
};

enum class ClusterKind { compute_centric, memory_centric };

const char* to_string(ClusterKind k);

struct ClusterSpec {
  ClusterKind kind = ClusterKind::compute_centric;
  int cores = 4;
  uint64_t data_memory_bytes = 128 * 1024;
  std::variant<SaSpec, CimSpec> coproc = SaSpec{};

  bool has_sa() const { return std::holds_alternative<SaSpec>(coproc); }
  bool has_cim() const { return std::holds_alternative<CimSpec>(coproc); }
  const SaSpec& sa() const { return std::get<SaSpec>(coproc); }
  const CimSpec& cim() const { return std::get<CimSpec>(coproc); }
};

// Whole-chip description: `groups` identical groups, each holding
// cc_clusters_per_group compute-centric and mc_clusters_per_group
// memory-centric clusters, all sharing one DRAM interface.
struct ArchConfig {
  int groups = 4;
  int cc_clusters_per_group = 2;
  int mc_clusters_per_group = 2;
  ClusterSpec cc_cluster;
  ClusterSpec mc_cluster;
  double clock_hz = 1.0e9;
  double dram_bandwidth_bytes_per_s = 336.0e9;
  uint64_t dma_overhead_bytes = 4096;   // per-transfer fixed cost, see effective_bandwidth()
  uint64_t shared_buffer_bytes = 16 * 1024;
  uint64_t throttle_interval_cycles = 10000;

  int total_cc_clusters() const { return groups * cc_clusters_per_group; }
  int total_mc_clusters() const { return groups * mc_clusters_per_group; }
  int total_clusters() const { return total_cc_clusters() + total_mc_clusters(); }
  int total_cc_cores() const { return total_cc_clusters() * cc_cluster.cores; }
  int total_mc_cores() const { return total_mc_clusters() * mc_cluster.cores; }
  double bytes_per_cycle() const { return dram_bandwidth_bytes_per_s / clock_hz; }

  // DMA chunk granularity used when streaming weights from DRAM: CC cores
  // double-buffer their slice of cluster data memory, MC cores double-buffer
  // the macro itself.
  uint64_t cc_stream_chunk_bytes() const;
  uint64_t mc_stream_chunk_bytes() const;
};

struct ValidationReport {
  std::vector<std::string> violations;
  bool ok() const { return violations.empty(); }
  std::string to_string() const;
};

// Structural checks only; never throws, reports every violation found.
ValidationReport validate(const ArchConfig& arch);

// Peak MAC throughput in FLOP/s (2 FLOPs per MAC), summed over all cores.
double peak_flops(const ArchConfig& arch);

ArchConfig default_arch();

ArchConfig arch_from_config(const ConfigMap& cfg);
ConfigMap arch_to_config(const ArchConfig& arch);

}  // namespace hetsim
