#include "hetsim/arch.h"

#include <cmath>
#include <sstream>

namespace hetsim {

const char* to_string(ClusterKind k) {
  return k == ClusterKind::compute_centric ? "cc" : "mc";
}

uint64_t ArchConfig::cc_stream_chunk_bytes() const {
  if (cc_cluster.cores <= 0) return 0;
  return cc_cluster.data_memory_bytes / (uint64_t(cc_cluster.cores) * 2);
}

uint64_t ArchConfig::mc_stream_chunk_bytes() const {
  if (!mc_cluster.has_cim()) return 0;
  return uint64_t(mc_cluster.cim().macro_bytes()) / 2;
}

namespace {

void check_sa(const SaSpec& sa, const std::string& where, std::vector<std::string>& out) {
  if (sa.rows < 1) out.push_back(where + ": systolic rows must be >= 1");
  if (sa.cols < 1) out.push_back(where + ": systolic cols must be >= 1");
  if (sa.matrix_registers < 2)
    out.push_back(where + ": matrix_registers must be >= 2 for load/drain overlap");
  if (sa.operand_bits != 8 && sa.operand_bits != 16 && sa.operand_bits != 32)
    out.push_back(where + ": operand_bits must be 8, 16 or 32");
}

void check_cim(const CimSpec& cim, const std::string& where, std::vector<std::string>& out) {
  if (cim.cols < 1) out.push_back(where + ": cim cols must be >= 1");
  if (cim.subarrays_per_col < 1) out.push_back(where + ": cim subarrays_per_col must be >= 1");
  if (cim.depth < 1) out.push_back(where + ": cim depth must be >= 1");
  if (cim.weight_bits != 4 && cim.weight_bits != 8 && cim.weight_bits != 16)
    out.push_back(where + ": cim weight_bits must be 4, 8 or 16");
  if (cim.act_bits < 1) out.push_back(where + ": cim act_bits must be >= 1");
  if (cim.capacity_weights() <= 0) out.push_back(where + ": cim macro capacity must be positive");
}

void check_cluster(const ClusterSpec& c, const std::string& where, std::vector<std::string>& out) {
  if (c.cores < 1) out.push_back(where + ": cores must be >= 1");
  if (c.data_memory_bytes == 0) out.push_back(where + ": data_memory_bytes must be positive");
  if (c.kind == ClusterKind::compute_centric && !c.has_sa())
    out.push_back(where + ": coproc kind mismatch (compute-centric cluster needs a systolic array)");
  if (c.kind == ClusterKind::memory_centric && !c.has_cim())
    out.push_back(where + ": coproc kind mismatch (memory-centric cluster needs a cim macro)");
  if (c.has_sa()) check_sa(c.sa(), where, out);
  if (c.has_cim()) check_cim(c.cim(), where, out);
}

}  // namespace

ValidationReport validate(const ArchConfig& arch) {
  ValidationReport rep;
  auto& out = rep.violations;

  if (arch.groups < 1) out.push_back("arch: groups must be >= 1");
  if (arch.cc_clusters_per_group < 0 || arch.mc_clusters_per_group < 0)
    out.push_back("arch: cluster counts per group must be >= 0");
  if (arch.cc_clusters_per_group + arch.mc_clusters_per_group < 1)
    out.push_back("arch: each group needs at least one cluster");

  if (arch.cc_clusters_per_group > 0) check_cluster(arch.cc_cluster, "cc_cluster", out);
  if (arch.mc_clusters_per_group > 0) check_cluster(arch.mc_cluster, "mc_cluster", out);

  if (arch.cc_clusters_per_group > 0 && arch.cc_cluster.kind != ClusterKind::compute_centric)
    out.push_back("cc_cluster: kind must be compute-centric");
  if (arch.mc_clusters_per_group > 0 && arch.mc_cluster.kind != ClusterKind::memory_centric)
    out.push_back("mc_cluster: kind must be memory-centric");

  // The CIM macro is itself the core-local weight store, so a memory-centric
  // cluster is expected to hold at least as much state as a compute-centric one.
  if (arch.cc_clusters_per_group > 0 && arch.mc_clusters_per_group > 0 &&
      arch.mc_cluster.data_memory_bytes < arch.cc_cluster.data_memory_bytes)
    out.push_back("mc_cluster: data_memory_bytes below cc_cluster data_memory_bytes");

  if (!(arch.clock_hz > 0) || !std::isfinite(arch.clock_hz))
    out.push_back("arch: clock_hz must be positive and finite");
  if (!(arch.dram_bandwidth_bytes_per_s > 0) || !std::isfinite(arch.dram_bandwidth_bytes_per_s))
    out.push_back("arch: dram_bandwidth_bytes_per_s must be positive and finite");
  if (arch.throttle_interval_cycles == 0)
    out.push_back("arch: throttle_interval_cycles must be positive");

  if (rep.ok()) {
    double peak = peak_flops(arch);
    if (!(peak > 0) || !std::isfinite(peak))
      out.push_back("arch: peak throughput is not positive and finite");
  }
  return rep;
}

std::string ValidationReport::to_string() const {
  if (ok()) return "ok\n";
  std::ostringstream ss;
  for (const auto& v : violations) ss << "violation: " << v << "\n";
  return ss.str();
}

double peak_flops(const ArchConfig& arch) {
  double macs = 0.0;
  if (arch.cc_clusters_per_group > 0 && arch.cc_cluster.has_sa())
    macs += double(arch.total_cc_cores()) * double(arch.cc_cluster.sa().macs_per_cycle());
  if (arch.mc_clusters_per_group > 0 && arch.mc_cluster.has_cim())
    macs += double(arch.total_mc_cores()) * arch.mc_cluster.cim().macs_per_cycle();
  return macs * 2.0 * arch.clock_hz;
}

ArchConfig default_arch() {
  ArchConfig a;
  a.cc_cluster.kind = ClusterKind::compute_centric;
  a.cc_cluster.cores = 4;
  a.cc_cluster.data_memory_bytes = 128 * 1024;
  a.cc_cluster.coproc = SaSpec{};

  a.mc_cluster.kind = ClusterKind::memory_centric;
  a.mc_cluster.cores = 2;
  CimSpec cim;
  a.mc_cluster.coproc = cim;
  // Two macro buffers per core (ping/pong) plus the cluster-shared staging
  // buffer; dominated by the macro itself.
  a.mc_cluster.data_memory_bytes =
      uint64_t(cim.macro_bytes()) * 2 + a.shared_buffer_bytes;
  return a;
}

namespace {

ClusterKind kind_from_string(const std::string& s) {
  if (s == "cc" || s == "compute_centric") return ClusterKind::compute_centric;
  if (s == "mc" || s == "memory_centric") return ClusterKind::memory_centric;
  throw std::runtime_error("unknown cluster kind '" + s + "'");
}

SaSpec sa_from(const ConfigMap& cfg, const std::string& p, const SaSpec& dflt) {
  SaSpec sa = dflt;
  sa.rows = int(cfg.get_int(p + ".sa.rows", sa.rows));
  sa.cols = int(cfg.get_int(p + ".sa.cols", sa.cols));
  sa.matrix_registers = int(cfg.get_int(p + ".sa.matrix_registers", sa.matrix_registers));
  sa.operand_bits = int(cfg.get_int(p + ".sa.operand_bits", sa.operand_bits));
  return sa;
}

CimSpec cim_from(const ConfigMap& cfg, const std::string& p, const CimSpec& dflt) {
  CimSpec cim = dflt;
  cim.cols = int(cfg.get_int(p + ".cim.cols", cim.cols));
  cim.subarrays_per_col = int(cfg.get_int(p + ".cim.subarrays_per_col", cim.subarrays_per_col));
  cim.depth = int(cfg.get_int(p + ".cim.depth", cim.depth));
  cim.weight_bits = int(cfg.get_int(p + ".cim.weight_bits", cim.weight_bits));
  cim.act_bits = int(cfg.get_int(p + ".cim.act_bits", cim.act_bits));
  return cim;
}

void sa_to(ConfigMap& cfg, const std::string& p, const SaSpec& sa) {
  cfg.set_int(p + ".sa.rows", sa.rows);
  cfg.set_int(p + ".sa.cols", sa.cols);
  cfg.set_int(p + ".sa.matrix_registers", sa.matrix_registers);
  cfg.set_int(p + ".sa.operand_bits", sa.operand_bits);
}

void cim_to(ConfigMap& cfg, const std::string& p, const CimSpec& cim) {
  cfg.set_int(p + ".cim.cols", cim.cols);
  cfg.set_int(p + ".cim.subarrays_per_col", cim.subarrays_per_col);
  cfg.set_int(p + ".cim.depth", cim.depth);
  cfg.set_int(p + ".cim.weight_bits", cim.weight_bits);
  cfg.set_int(p + ".cim.act_bits", cim.act_bits);
}

}  // namespace

ArchConfig arch_from_config(const ConfigMap& cfg) {
  ArchConfig a = default_arch();
  a.groups = int(cfg.get_int("arch.groups", a.groups));
  a.cc_clusters_per_group = int(cfg.get_int("arch.cc.clusters_per_group", a.cc_clusters_per_group));
  a.mc_clusters_per_group = int(cfg.get_int("arch.mc.clusters_per_group", a.mc_clusters_per_group));
  a.clock_hz = cfg.get_real("arch.clock_hz", a.clock_hz);
  a.dram_bandwidth_bytes_per_s =
      cfg.get_real("arch.dram_bandwidth_bytes_per_s", a.dram_bandwidth_bytes_per_s);
  a.dma_overhead_bytes = cfg.get_u64("arch.dma_overhead_bytes", a.dma_overhead_bytes);
  a.shared_buffer_bytes = cfg.get_u64("arch.shared_buffer_bytes", a.shared_buffer_bytes);
  a.throttle_interval_cycles =
      cfg.get_u64("arch.throttle_interval_cycles", a.throttle_interval_cycles);

  a.cc_cluster.kind = kind_from_string(cfg.get_str("arch.cc.kind", "cc"));
  a.cc_cluster.cores = int(cfg.get_int("arch.cc.cores", a.cc_cluster.cores));
  a.cc_cluster.data_memory_bytes =
      cfg.get_u64("arch.cc.data_memory_bytes", a.cc_cluster.data_memory_bytes);
  if (a.cc_cluster.kind == ClusterKind::compute_centric)
    a.cc_cluster.coproc = sa_from(cfg, "arch.cc", a.cc_cluster.has_sa() ? a.cc_cluster.sa() : SaSpec{});
  else
    a.cc_cluster.coproc = cim_from(cfg, "arch.cc", CimSpec{});

  a.mc_cluster.kind = kind_from_string(cfg.get_str("arch.mc.kind", "mc"));
  a.mc_cluster.cores = int(cfg.get_int("arch.mc.cores", a.mc_cluster.cores));
  if (a.mc_cluster.kind == ClusterKind::memory_centric)
    a.mc_cluster.coproc = cim_from(cfg, "arch.mc", a.mc_cluster.has_cim() ? a.mc_cluster.cim() : CimSpec{});
  else
    a.mc_cluster.coproc = sa_from(cfg, "arch.mc", SaSpec{});
  // Unless pinned in the file, data memory tracks the configured macro size.
  uint64_t mc_mem_dflt = a.mc_cluster.has_cim()
      ? uint64_t(a.mc_cluster.cim().macro_bytes()) * 2 + a.shared_buffer_bytes
      : a.mc_cluster.data_memory_bytes;
  a.mc_cluster.data_memory_bytes = cfg.get_u64("arch.mc.data_memory_bytes", mc_mem_dflt);
  return a;
}

ConfigMap arch_to_config(const ArchConfig& a) {
  ConfigMap cfg;
  cfg.set_int("arch.groups", a.groups);
  cfg.set_real("arch.clock_hz", a.clock_hz);
  cfg.set_real("arch.dram_bandwidth_bytes_per_s", a.dram_bandwidth_bytes_per_s);
  cfg.set_u64("arch.dma_overhead_bytes", a.dma_overhead_bytes);
  cfg.set_u64("arch.shared_buffer_bytes", a.shared_buffer_bytes);
  cfg.set_u64("arch.throttle_interval_cycles", a.throttle_interval_cycles);

  cfg.set_int("arch.cc.clusters_per_group", a.cc_clusters_per_group);
  cfg.set_str("arch.cc.kind", to_string(a.cc_cluster.kind));
  cfg.set_int("arch.cc.cores", a.cc_cluster.cores);
  cfg.set_u64("arch.cc.data_memory_bytes", a.cc_cluster.data_memory_bytes);
  if (a.cc_cluster.has_sa()) sa_to(cfg, "arch.cc", a.cc_cluster.sa());
  if (a.cc_cluster.has_cim()) cim_to(cfg, "arch.cc", a.cc_cluster.cim());

  cfg.set_int("arch.mc.clusters_per_group", a.mc_clusters_per_group);
  cfg.set_str("arch.mc.kind", to_string(a.mc_cluster.kind));
  cfg.set_int("arch.mc.cores", a.mc_cluster.cores);
  cfg.set_u64("arch.mc.data_memory_bytes", a.mc_cluster.data_memory_bytes);
  if (a.mc_cluster.has_sa()) sa_to(cfg, "arch.mc", a.mc_cluster.sa());
  if (a.mc_cluster.has_cim()) cim_to(cfg, "arch.mc", a.mc_cluster.cim());
  return cfg;
}

}  // namespace hetsim
