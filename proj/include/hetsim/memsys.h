#pragma once

#include <cstdint>
#include <limits>

#include "hetsim/arch.h"

namespace hetsim {

// Sentinel budget meaning "never throttle".
inline constexpr uint64_t unlimited_budget = std::numeric_limits<uint64_t>::max();

// Fraction of the ideal link rate a DMA stream achieves when each transfer
// moves `transfer_bytes` of payload but costs `overhead_bytes` of dead time
// (descriptor setup, page opens, bursts cut short).  eff = s / (s + o).
// Larger transfers amortize the overhead away; tiny ones fall off the knee.
double effective_bandwidth(uint64_t transfer_bytes, double ideal_bytes_per_s,
                           uint64_t overhead_bytes);

// Cycles to move `total_bytes` from DRAM in `transfer_bytes`-sized chunks
// over a link granted `allocated_bytes_per_cycle`.  Zero bytes cost zero.
double phase_memory_cycles(uint64_t total_bytes, double allocated_bytes_per_cycle,
                           uint64_t transfer_bytes, uint64_t overhead_bytes);

// Per-cluster DRAM byte budgets over one accounting interval.
struct BandwidthBudget {
  uint64_t cc_bytes_per_interval = unlimited_budget;
  uint64_t mc_bytes_per_interval = unlimited_budget;
  uint64_t interval_cycles = 10000;

  double cc_bytes_per_cycle(const ArchConfig& a) const;
  double mc_bytes_per_cycle(const ArchConfig& a) const;
};

// Performance-counter view of one cluster's DMA traffic, advanced by
// throttle_step.  Counters reset at interval boundaries before the cycle's
// own traffic is accounted (reset-then-account), and a cluster that exhausts
// its budget queues until the next boundary.
struct PmcState {
  uint64_t interval_index = 0;
  uint64_t bytes_this_interval = 0;
  uint64_t total_granted = 0;
  uint64_t total_blocked_requests = 0;
};

struct ThrottleDecision {
  bool granted = false;
  uint64_t release_cycle = 0;  // when a blocked request may retry
};

// Accounts a `request_bytes` DMA request issued at `now_cycle` against the
// per-interval budget.  Grants never overshoot: a request that does not fit
// in the current interval's remaining budget is queued to the next boundary.
ThrottleDecision throttle_step(PmcState& st, uint64_t request_bytes, uint64_t budget_bytes,
                               uint64_t interval_cycles, uint64_t now_cycle);

}  // namespace hetsim
