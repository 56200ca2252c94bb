#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "hetsim/config.h"

namespace hetsim {

enum class Phase { encode = 0, prefill = 1, decode = 2 };
enum class KernelKind { gemm, gemv, elementwise, softmax };
enum class Activation { relu, silu, gelu };
// Which activation vector gates a prunable FFN matrix: the layer input (vx)
// selects columns of the up/gate projections, the intermediate (vd) selects
// columns of the down projection.
enum class PruneVec { none, vx, vd };

const char* to_string(Phase p);
const char* to_string(KernelKind k);

// One operator instance with exact FLOP and byte footprints.
// gemm:        (m x k) * (k x n), weights k x n resident or streamed
// gemv:        m batched rows against a k -> n matrix (m = 1 when unbatched)
// elementwise: m x n elements, one op each
// softmax:     m rows of length n
struct Kernel {
  KernelKind kind = KernelKind::gemm;
  Phase phase = Phase::encode;
  int layer_index = -1;  // -1 for stem/projector/head kernels
  std::string name;
  uint64_t m = 0, k = 0, n = 0;
  uint64_t weight_bytes = 0;  // parameter reads (DRAM unless resident)
  uint64_t act_bytes = 0;     // input activation + cache reads
  uint64_t out_bytes = 0;     // activation + cache writes
  uint64_t flops = 0;
  PruneVec prune = PruneVec::none;

  bool prunable() const { return prune != PruneVec::none; }
  uint64_t dram_bytes() const { return weight_bytes + act_bytes + out_bytes; }
};

struct PhaseTotals {
  uint64_t flops = 0;
  uint64_t weight_bytes = 0;
  uint64_t act_bytes = 0;
  uint64_t out_bytes = 0;
  uint64_t dram_bytes() const { return weight_bytes + act_bytes + out_bytes; }
};

// Vision encoder + projector + decoder-only LLM, dimensioned by config.
struct ModelConfig {
  std::string name = "vlm-1.1b";
  // ViT-style encoder (non-gated MLP, full attention).
  int encoder_layers = 24;
  int encoder_d_model = 1152;
  int encoder_heads = 16;
  int encoder_ffn_mult = 4;
  int encoder_patch_dim = 588;  // flattened input patch, folded conv stem
  Activation encoder_activation = Activation::gelu;
  int projector_pool_factor = 4;  // patches concatenated per visual token
  // Decoder-only LLM (gated FFN, grouped-query attention).
  int llm_layers = 22;
  int d_model = 2048;
  int d_ffn = 5632;
  int heads = 32;
  int kv_heads = 4;
  int vocab_size = 32000;
  Activation activation_fn = Activation::silu;
  int weight_bytes_per_elem = 2;
  int act_bytes_per_elem = 2;

  int head_dim() const { return d_model / heads; }
  int d_kv() const { return head_dim() * kv_heads; }
  // LLM parameter count covering everything a decode step streams:
  // per-layer projections plus the output head.
  uint64_t llm_stream_weights() const;
  uint64_t llm_ffn_weights() const;
};

enum class BandwidthPolicy { equal, fixed, dynamic };
enum class ScenarioMode { pipeline, compare };

struct PruneSettings {
  bool enabled = false;
  double t = 16.0;              // magnitude-ratio threshold divisor
  int cores = 16;               // local channel slices (one per decode core)
  bool skip_first_layer = true;
  bool prune_vd = false;
  double uniform_ratio = -1.0;  // >= 0 overrides trace-derived ratios
  std::string trace_path;       // activation trace for ratio extraction
};

struct Scenario {
  std::string id = "default";
  ScenarioMode mode = ScenarioMode::pipeline;
  uint64_t input_tokens = 300;    // LLM prompt length incl. visual tokens
  uint64_t encoder_tokens = 0;    // 0 = projector_pool_factor * input_tokens
  uint64_t output_tokens = 128;
  uint64_t batch = 1;
  BandwidthPolicy policy = BandwidthPolicy::dynamic;
  int fixed_ratio_cc = 1, fixed_ratio_mc = 1;
  PruneSettings prune;
  uint64_t seed = 1;

  uint64_t resolved_encoder_tokens(const ModelConfig& m) const;
};

// Ordered operator list with phase boundaries.  Decode kernels appear
// iteration by iteration (sequence length grows by one each time); batched
// decode reuses one weight fetch across the m = batch rows of each GEMV.
struct OperatorGraph {
  std::vector<Kernel> kernels;
  size_t encode_count = 0;
  size_t prefill_count = 0;
  std::vector<size_t> decode_iter_start;  // kernel index of each decode iteration

  size_t decode_iterations() const { return decode_iter_start.size(); }
  PhaseTotals totals(Phase p) const;
  // Parameter bytes streamed by one decode iteration (identical across
  // iterations; batching does not change it).
  uint64_t decode_iteration_weight_bytes() const;
};

// Builds the full encode/prefill/decode operator graph for one request
// stream.  Throws std::overflow_error when dimensions would overflow the
// byte/FLOP accounting and std::invalid_argument on non-positive dims.
OperatorGraph build_graph(const ModelConfig& model, const Scenario& scen);

void dump_graph(const OperatorGraph& g, std::ostream& os);

ModelConfig model_from_config(const ConfigMap& cfg);
ConfigMap model_to_config(const ModelConfig& m);
Scenario scenario_from_config(const ConfigMap& cfg);
ConfigMap scenario_to_config(const Scenario& s);

// Dense row-major matrix used by the numeric reference paths.
struct MatrixF {
  size_t rows = 0, cols = 0;
  std::vector<double> d;

  MatrixF() = default;
  MatrixF(size_t r, size_t c) : rows(r), cols(c), d(r * c, 0.0) {}
  double& at(size_t r, size_t c) { return d[r * cols + c]; }
  double at(size_t r, size_t c) const { return d[r * cols + c]; }
};

double apply_activation(Activation a, double x);

// Gated FFN reference: out = W_down * (W_up * v  ∘  act(W_gate * v)).
// W_up, W_gate are d_ffn x d_model; W_down is d_model x d_ffn.
std::vector<double> ffn_reference(const std::vector<double>& v, const MatrixF& w_up,
                                  const MatrixF& w_gate, const MatrixF& w_down,
                                  Activation act);

}  // namespace hetsim
