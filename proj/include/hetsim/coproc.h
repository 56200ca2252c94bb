#pragma once

#include <cstdint>

#include "hetsim/arch.h"
#include "hetsim/workload.h"

namespace hetsim {

// Throughput of the per-core vector unit used for elementwise/softmax work,
// in FLOP per cycle per core.
inline constexpr uint64_t vector_flops_per_cycle = 16;

// Latency of one weight-stationary systolic tile: load R weight rows, then
// stream M activation rows through the R x C grid with full fill/drain skew.
// The closed form is 2R + C + M - 3 cycles, clamped to at least one cycle.
uint64_t sa_tile_cycles(uint64_t rows, uint64_t cols, uint64_t m);

// Latency of a chained group of `passes` bit-serial multiply passes on a CIM
// macro with `act_bits`-bit activations: passes * act_bits + 1 (the trailing
// cycle drains the accumulator pipeline; intermediate drains overlap the next
// pass's first bit).
uint64_t cim_pass_cycles(uint64_t passes, uint64_t act_bits);

// How a dense k x n weight matrix lands on one coprocessor.
struct TileSchedule {
  uint64_t k_tiles = 0;   // input-dim tiles (SA rows / CIM subarray slices)
  uint64_t n_tiles = 0;   // output-dim tiles (SA cols / CIM column groups)
  uint64_t tiles() const { return k_tiles * n_tiles; }
};

TileSchedule plan_sa_tiles(uint64_t k, uint64_t n, const SaSpec& sa);
TileSchedule plan_cim_passes(uint64_t k, uint64_t n, const CimSpec& cim);

// Per-kernel coprocessor cost.  compute_cycles is the busy time of the most
// loaded core; utilization relates achieved MACs to the array peak over that
// span.  Memory time is layered on separately (see memsys).
struct CycleReport {
  uint64_t compute_cycles = 0;
  uint64_t dram_bytes = 0;
  double utilization = 0.0;
};

// GEMM (or batched GEMV, m rows) on `cores` systolic arrays.  Weight tiles
// are distributed across cores; every tile pays the full fill/drain latency
// (edge tiles are padded to R x C), while DRAM fetch of the next tile hides
// behind the spare matrix registers and does not add compute cycles.
CycleReport map_gemm_sa(const Kernel& kn, const SaSpec& sa, int cores);

// GEMM / batched GEMV on `cores` CIM macros.  Output column groups are
// distributed across cores; each group chains m * ceil(k/subarrays) passes
// with a single trailing drain cycle (rows stream back-to-back, so per-row
// drains overlap the next row's first bit).
CycleReport map_gemm_cim(const Kernel& kn, const CimSpec& cim, int cores);
CycleReport map_gemv_cim(const Kernel& kn, const CimSpec& cim, int cores);

// Elementwise / softmax work on the host cores' vector units.
CycleReport map_vector(const Kernel& kn, int cores);

// Cycle-stepped oracle for one systolic tile: walks activations through an
// explicit R x C shift-register grid and reports the cycle count from the
// first weight-load cycle to the last MAC, inclusive.
uint64_t micro_sim_sa_grid(int rows, int cols, uint64_t m);

// Resource-scheduling oracle for a chained CIM pass group: streams pass bits
// through a stream stage and a one-cycle commit stage.
uint64_t micro_sim_cim_chain(uint64_t passes, uint64_t act_bits);

// Whole-kernel oracles: same tile/slice decomposition as the analytic
// mappings, but each tile is costed by the cycle-stepped grid / pass-chain
// simulators and work is dealt round-robin instead of with closed-form
// ceilings.  Intended for small dimensions (<= 64 per axis).
uint64_t micro_simulate(const Kernel& kn, const SaSpec& sa, int cores);
uint64_t micro_simulate(const Kernel& kn, const CimSpec& cim, int cores);

}  // namespace hetsim
