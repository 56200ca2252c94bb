#include "hetsim/coproc.h"

#include <algorithm>
#include <stdexcept>
#include <vector>

namespace hetsim {

namespace {

uint64_t ceil_div(uint64_t a, uint64_t b) { return (a + b - 1) / b; }

void require(bool cond, const char* msg) {
  if (!cond) throw std::invalid_argument(msg);
}

double mac_utilization(uint64_t flops, double macs_per_cycle, int cores, uint64_t cycles) {
  if (cycles == 0) return 0.0;
  double ideal = double(flops) / 2.0 / (macs_per_cycle * cores);
  return ideal / double(cycles);
}

}  // namespace

uint64_t sa_tile_cycles(uint64_t rows, uint64_t cols, uint64_t m) {
  require(rows >= 1 && cols >= 1 && m >= 1, "sa_tile_cycles: dims must be >= 1");
  uint64_t cycles = 2 * rows + cols + m - 3;
  return cycles < 1 ? 1 : cycles;
}

uint64_t cim_pass_cycles(uint64_t passes, uint64_t act_bits) {
  require(passes >= 1 && act_bits >= 1, "cim_pass_cycles: args must be >= 1");
  return passes * act_bits + 1;
}

TileSchedule plan_sa_tiles(uint64_t k, uint64_t n, const SaSpec& sa) {
  require(k >= 1 && n >= 1, "plan_sa_tiles: dims must be >= 1");
  TileSchedule ts;
  ts.k_tiles = ceil_div(k, sa.rows);
  ts.n_tiles = ceil_div(n, sa.cols);
  return ts;
}

TileSchedule plan_cim_passes(uint64_t k, uint64_t n, const CimSpec& cim) {
  require(k >= 1 && n >= 1, "plan_cim_passes: dims must be >= 1");
  TileSchedule ts;
  ts.k_tiles = ceil_div(k, cim.subarrays_per_col);
  ts.n_tiles = ceil_div(n, cim.cols);
  return ts;
}

CycleReport map_gemm_sa(const Kernel& kn, const SaSpec& sa, int cores) {
  require(cores >= 1, "map_gemm_sa: cores must be >= 1");
  require(kn.kind == KernelKind::gemm || kn.kind == KernelKind::gemv,
          "map_gemm_sa: expects a matmul kernel");
  TileSchedule ts = plan_sa_tiles(kn.k, kn.n, sa);
  // Edge tiles are padded to the full R x C footprint, and tiles never
  // overlap their fill/drain: the register file hides the DRAM fetch of the
  // next tile, not the register->array load.
  uint64_t per_tile = sa_tile_cycles(sa.rows, sa.cols, kn.m);
  uint64_t per_core_tiles = ceil_div(ts.tiles(), cores);
  CycleReport rep;
  rep.compute_cycles = per_core_tiles * per_tile;
  rep.dram_bytes = kn.dram_bytes();
  rep.utilization = mac_utilization(kn.flops, double(sa.macs_per_cycle()), cores, rep.compute_cycles);
  return rep;
}

CycleReport map_gemm_cim(const Kernel& kn, const CimSpec& cim, int cores) {
  require(cores >= 1, "map_gemm_cim: cores must be >= 1");
  require(kn.kind == KernelKind::gemm || kn.kind == KernelKind::gemv,
          "map_gemm_cim: expects a matmul kernel");
  TileSchedule ts = plan_cim_passes(kn.k, kn.n, cim);
  // One output column group accumulates m * k_tiles chained passes; the
  // chain drains once because back-to-back rows overlap the commit stage.
  uint64_t chain = cim_pass_cycles(kn.m * ts.k_tiles, cim.act_bits);
  uint64_t per_core_groups = ceil_div(ts.n_tiles, cores);
  CycleReport rep;
  rep.compute_cycles = per_core_groups * chain;
  rep.dram_bytes = kn.dram_bytes();
  rep.utilization = mac_utilization(kn.flops, cim.macs_per_cycle(), cores, rep.compute_cycles);
  return rep;
}

CycleReport map_gemv_cim(const Kernel& kn, const CimSpec& cim, int cores) {
  return map_gemm_cim(kn, cim, cores);
}

CycleReport map_vector(const Kernel& kn, int cores) {
  require(cores >= 1, "map_vector: cores must be >= 1");
  CycleReport rep;
  rep.compute_cycles = ceil_div(kn.flops, vector_flops_per_cycle * cores);
  rep.dram_bytes = kn.dram_bytes();
  rep.utilization = 0.0;
  return rep;
}

uint64_t micro_sim_sa_grid(int rows, int cols, uint64_t m) {
  require(rows >= 1 && cols >= 1 && m >= 1, "micro_sim_sa_grid: dims must be >= 1");
  // act[i][j] holds the activation-row index occupying PE (i, j) this cycle,
  // or -1.  Row i of activation-row mm reaches the left edge at cycle
  // (rows-1) + mm + i -- the first activation enters while the last weight
  // row is still loading -- and then shifts one column per cycle.
  std::vector<std::vector<int64_t>> act(rows, std::vector<int64_t>(cols, -1));
  const uint64_t total_macs = uint64_t(rows) * cols * m;
  uint64_t macs = 0;
  uint64_t last_mac_cycle = 0;
  for (uint64_t t = 0; macs < total_macs; t++) {
    for (int i = 0; i < rows; i++) {
      for (int j = cols - 1; j >= 1; j--) act[i][j] = act[i][j - 1];
      int64_t mm = int64_t(t) - (rows - 1) - i;
      act[i][0] = (mm >= 0 && uint64_t(mm) < m) ? mm : -1;
    }
    for (int i = 0; i < rows; i++)
      for (int j = 0; j < cols; j++)
        if (act[i][j] >= 0) {
          macs++;
          last_mac_cycle = t;
        }
  }
  return last_mac_cycle + 1;
}

uint64_t micro_sim_cim_chain(uint64_t passes, uint64_t act_bits) {
  require(passes >= 1 && act_bits >= 1, "micro_sim_cim_chain: args must be >= 1");
  // Two pipelined resources: the bitline stream stage (act_bits cycles per
  // pass) and the accumulator commit stage (one cycle per pass).
  uint64_t stream_free = 0;
  uint64_t commit_free = 0;
  for (uint64_t p = 0; p < passes; p++) {
    uint64_t start = stream_free;
    stream_free = start + act_bits;
    uint64_t commit_at = std::max(stream_free, commit_free);
    commit_free = commit_at + 1;
  }
  return commit_free;
}

uint64_t micro_simulate(const Kernel& kn, const SaSpec& sa, int cores) {
  require(cores >= 1, "micro_simulate: cores must be >= 1");
  TileSchedule ts = plan_sa_tiles(kn.k, kn.n, sa);
  std::vector<uint64_t> core_busy(cores, 0);
  uint64_t tile = 0;
  for (uint64_t kt = 0; kt < ts.k_tiles; kt++)
    for (uint64_t nt = 0; nt < ts.n_tiles; nt++, tile++)
      core_busy[tile % cores] += micro_sim_sa_grid(sa.rows, sa.cols, kn.m);
  return *std::max_element(core_busy.begin(), core_busy.end());
}

uint64_t micro_simulate(const Kernel& kn, const CimSpec& cim, int cores) {
  require(cores >= 1, "micro_simulate: cores must be >= 1");
  TileSchedule ts = plan_cim_passes(kn.k, kn.n, cim);
  std::vector<uint64_t> core_busy(cores, 0);
  for (uint64_t nt = 0; nt < ts.n_tiles; nt++)
    core_busy[nt % cores] += micro_sim_cim_chain(kn.m * ts.k_tiles, cim.act_bits);
  return *std::max_element(core_busy.begin(), core_busy.end());
}

}  // namespace hetsim
