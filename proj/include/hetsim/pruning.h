#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "hetsim/workload.h"

namespace hetsim {

struct PruneParams {
  double t = 16.0;              // channels with |v| > max|v| / t count as live
  bool skip_first_layer = true; // layer 0 always runs dense
  int cores = 16;               // independent channel slices, one per core
  bool prune_vd = false;        // also prune the down-projection input
};

// Per-core pruning state for one request stream.  k starts at the local
// slice width each token and can only shrink as layers go by: a channel
// dropped once stays dropped for the rest of the token.
struct PruningState {
  uint64_t d_local = 0;
  uint64_t k = 0;
  int layer_index = 0;
  std::vector<uint8_t> mask;      // selected channels of the last step
  double realized_ratio = 0.0;    // 1 - selected/d_local for the last step

  void reset_token(uint64_t d_local_channels);
};

// One layer step of activation-aware Top-k selection on a core-local slice:
// keep the k largest |v| (ties break to the lower index), count how many
// channels clear the max|v|/t threshold, and lower k to that count for later
// layers.  Layer 0 selects everything when skip_first_layer is set.
// Returns the indices kept this layer, sorted ascending.
std::vector<uint32_t> dynamic_topk_step(std::span<const double> v, PruningState& st,
                                        const PruneParams& p);

// Pearson kurtosis m4 / m2^2 about the mean (normal ~ 3).  Throws on fewer
// than two elements or zero variance.
double kurtosis(std::span<const double> v);

double cosine_similarity(std::span<const double> a, std::span<const double> b);

// Layer-major activation record for one request stream: vectors are indexed
// [token][layer].  vx rows have d_model entries, vd rows d_ffn.
struct ActivationTrace {
  std::string model_name;
  int layers = 0;
  int d_model = 0;
  int d_ffn = 0;
  int tokens = 0;
  std::vector<std::vector<double>> vx;  // token * layers + layer
  std::vector<std::vector<double>> vd;

  size_t index(int token, int layer) const { return size_t(token) * layers + layer; }
  const std::vector<double>& vx_at(int token, int layer) const { return vx[index(token, layer)]; }
  const std::vector<double>& vd_at(int token, int layer) const { return vd[index(token, layer)]; }
};

// Synthetic activations with a controlled heavy-tail profile: one fixed set
// of outlier channels (shared by all layers) rides on unit Gaussian noise,
// with the per-layer outlier magnitude solved (by bisection) so the expected
// Pearson kurtosis matches kurtosis_schedule[layer].  Targets must stay below
// the construction's ceiling of ~1/outlier_fraction.  Fully determined by
// `seed`.
ActivationTrace synth_trace(int layers, int d_model, int d_ffn, int tokens,
                            std::span<const double> kurtosis_schedule, uint64_t seed,
                            double outlier_fraction = 0.05);

// Mean dynamic prune ratios per layer over a trace: ratio_vx[l] is the mean
// realized V_x ratio at layer l, ratio_vd[l] the same for V_d (meaningful
// when prune_vd is set; still reported otherwise).
struct RatioProfile {
  std::vector<double> ratio_vx;
  std::vector<double> ratio_vd;
  double mean_vx = 0.0;
  double mean_vd = 0.0;
};

RatioProfile dynamic_ratios(const ActivationTrace& trace, const PruneParams& p);

// Numeric fidelity of pruned FFN evaluation against the dense reference,
// with fixed-ratio magnitude pruning baselines for comparison.
struct LayerFidelity {
  double cos_dynamic = 0.0;
  double cos_fixed_low = 0.0;   // fixed 10% ratio
  double cos_fixed_high = 0.0;  // fixed 70% ratio
  double ratio_vx = 0.0;
  double ratio_vd = 0.0;
};

struct FidelityReport {
  std::vector<LayerFidelity> layers;
  double mean_cos_dynamic = 0.0;
  double mean_cos_fixed_low = 0.0;
  double mean_cos_fixed_high = 0.0;
  double mean_ratio_vx = 0.0;
  double mean_ratio_vd = 0.0;
  double fixed_low_ratio = 0.1;
  double fixed_high_ratio = 0.7;
};

struct FfnWeights {
  MatrixF up, gate, down;  // d_ffn x d_model, d_ffn x d_model, d_model x d_ffn
  static FfnWeights random(int d_model, int d_ffn, uint64_t seed);
};

// Runs every trace token through one shared FFN under (a) dynamic Top-k,
// (b) fixed low/high magnitude pruning, comparing outputs to the dense
// reference.  `jobs` > 1 parallelizes across tokens; results are identical
// for any job count.
FidelityReport pruned_ffn_eval(const ActivationTrace& trace, const FfnWeights& w,
                               const PruneParams& p, const ModelConfig& model, int jobs = 1);

// Applies per-layer prune ratios to the decode weight traffic of a graph:
// up/gate weight bytes scale by (1 - ratio_vx[layer]), down bytes by
// (1 - ratio_vd[layer]) when prune_vd is set.  Compute FLOPs scale the same
// way; everything else is untouched.
OperatorGraph traffic_reduction(const OperatorGraph& g, std::span<const double> ratio_vx,
                                std::span<const double> ratio_vd, bool prune_vd);

// Trace file round-trip.  The text form is line oriented and self-describing;
// the binary form is a 32-byte header plus little-endian f32 payload.
void write_trace_text(const ActivationTrace& t, const std::string& path);
ActivationTrace read_trace_text(const std::string& path);
void write_trace_binary(const ActivationTrace& t, const std::string& path);
ActivationTrace read_trace_binary(const std::string& path);
// Dispatches on a ".bin" suffix.
ActivationTrace read_trace(const std::string& path);

}  // namespace hetsim
