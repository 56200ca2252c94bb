#include "hetsim/memsys.h"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace hetsim {

double effective_bandwidth(uint64_t transfer_bytes, double ideal_bytes_per_s,
                           uint64_t overhead_bytes) {
  if (transfer_bytes == 0)
    throw std::invalid_argument("effective_bandwidth: transfer size must be positive");
  if (!(ideal_bytes_per_s > 0) || !std::isfinite(ideal_bytes_per_s))
    throw std::invalid_argument("effective_bandwidth: ideal rate must be positive and finite");
  double s = double(transfer_bytes);
  return ideal_bytes_per_s * (s / (s + double(overhead_bytes)));
}

double phase_memory_cycles(uint64_t total_bytes, double allocated_bytes_per_cycle,
                           uint64_t transfer_bytes, uint64_t overhead_bytes) {
  if (total_bytes == 0) return 0.0;
  if (!(allocated_bytes_per_cycle > 0) || !std::isfinite(allocated_bytes_per_cycle))
    throw std::invalid_argument("phase_memory_cycles: allocation must be positive and finite");
  if (transfer_bytes == 0)
    throw std::invalid_argument("phase_memory_cycles: transfer size must be positive");
  // Every transfer, including a short final one, pays the fixed overhead.
  uint64_t transfers = (total_bytes + transfer_bytes - 1) / transfer_bytes;
  double wire_bytes = double(total_bytes) + double(transfers) * double(overhead_bytes);
  return wire_bytes / allocated_bytes_per_cycle;
}

double BandwidthBudget::cc_bytes_per_cycle(const ArchConfig& a) const {
  double link = a.bytes_per_cycle();
  if (cc_bytes_per_interval == unlimited_budget) return link;
  double per_cluster = double(cc_bytes_per_interval) / double(interval_cycles);
  return std::min(link, per_cluster * a.total_cc_clusters());
}

double BandwidthBudget::mc_bytes_per_cycle(const ArchConfig& a) const {
  double link = a.bytes_per_cycle();
  if (mc_bytes_per_interval == unlimited_budget) return link;
  double per_cluster = double(mc_bytes_per_interval) / double(interval_cycles);
  return std::min(link, per_cluster * a.total_mc_clusters());
}

ThrottleDecision throttle_step(PmcState& st, uint64_t request_bytes, uint64_t budget_bytes,
                               uint64_t interval_cycles, uint64_t now_cycle) {
  if (interval_cycles == 0)
    throw std::invalid_argument("throttle_step: interval must be positive");
  uint64_t idx = now_cycle / interval_cycles;
  if (idx < st.interval_index)
    throw std::invalid_argument("throttle_step: time went backwards");
  if (idx > st.interval_index) {
    // Boundary crossed: the counter resets before this cycle's traffic is
    // accounted, so unused budget never carries over.
    st.interval_index = idx;
    st.bytes_this_interval = 0;
  }

  ThrottleDecision d;
  if (budget_bytes == unlimited_budget) {
    st.bytes_this_interval += request_bytes;
    st.total_granted += request_bytes;
    d.granted = true;
    return d;
  }
  if (request_bytes > budget_bytes)
    throw std::invalid_argument("throttle_step: request exceeds a whole interval budget");
  if (st.bytes_this_interval + request_bytes <= budget_bytes) {
    st.bytes_this_interval += request_bytes;
    st.total_granted += request_bytes;
    d.granted = true;
  } else {
    st.total_blocked_requests++;
    d.granted = false;
    d.release_cycle = (idx + 1) * interval_cycles;
  }
  return d;
}

}  // namespace hetsim
