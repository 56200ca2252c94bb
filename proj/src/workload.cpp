#include "hetsim/workload.h"

#include <cmath>
#include <limits>
#include <ostream>
#include <stdexcept>

namespace hetsim {

namespace {

constexpr uint64_t max_tokens = uint64_t(1) << 20;
constexpr uint64_t max_batch = uint64_t(1) << 16;

uint64_t mul_ck(uint64_t a, uint64_t b) {
  if (b != 0 && a > std::numeric_limits<uint64_t>::max() / b)
    throw std::overflow_error("byte/flop accounting overflow");
  return a * b;
}

uint64_t add_ck(uint64_t a, uint64_t b) {
  if (a > std::numeric_limits<uint64_t>::max() - b)
    throw std::overflow_error("byte/flop accounting overflow");
  return a + b;
}

Activation activation_from_string(const std::string& s) {
  if (s == "relu") return Activation::relu;
  if (s == "silu") return Activation::silu;
  if (s == "gelu") return Activation::gelu;
  throw std::runtime_error("unknown activation '" + s + "'");
}

const char* activation_name(Activation a) {
  switch (a) {
    case Activation::relu: return "relu";
    case Activation::silu: return "silu";
    case Activation::gelu: return "gelu";
  }
  return "?";
}

// Accumulates kernels for one phase, charging DRAM traffic per the streaming
// convention: parameter matrices are fetched once per kernel instance, matmul
// activations cross DRAM (they exceed cluster memory at these shapes), and
// the attention score/softmax/context triple is treated as fused on-chip
// except for its Q/K/V reads and final output write.
struct GraphBuilder {
  const ModelConfig& m;
  OperatorGraph g;
  uint64_t wb, ab;

  explicit GraphBuilder(const ModelConfig& model)
      : m(model), wb(model.weight_bytes_per_elem), ab(model.act_bytes_per_elem) {}

  Kernel& push(KernelKind kind, Phase phase, int layer, std::string name, uint64_t mm,
               uint64_t kk, uint64_t nn) {
    if (mm == 0 || kk == 0 || nn == 0)
      throw std::invalid_argument("kernel '" + name + "' has a zero dimension");
    Kernel kn;
    kn.kind = kind;
    kn.phase = phase;
    kn.layer_index = layer;
    kn.name = std::move(name);
    kn.m = mm;
    kn.k = kk;
    kn.n = nn;
    g.kernels.push_back(std::move(kn));
    return g.kernels.back();
  }

  // Dense projection: weights k x n streamed once, m input rows, m output rows.
  void proj(KernelKind kind, Phase phase, int layer, const std::string& name, uint64_t mm,
            uint64_t kk, uint64_t nn, PruneVec prune = PruneVec::none) {
    Kernel& kn = push(kind, phase, layer, name, mm, kk, nn);
    kn.weight_bytes = mul_ck(mul_ck(kk, nn), wb);
    kn.act_bytes = mul_ck(mul_ck(mm, kk), ab);
    kn.out_bytes = mul_ck(mul_ck(mm, nn), ab);
    kn.flops = mul_ck(2, mul_ck(mm, mul_ck(kk, nn)));
    kn.prune = prune;
  }

  // Fused attention: `rows` query rows against per-stream KV caches of `seq`
  // positions (`streams` = independent caches: the batch during decode, one
  // during the self-attention phases).  Q and each cache cross DRAM once.
  void attention(Phase phase, int layer, uint64_t rows, uint64_t streams, uint64_t seq,
                 uint64_t d, uint64_t d_kv, uint64_t heads, KernelKind kind) {
    uint64_t cache = mul_ck(streams, mul_ck(seq, d_kv));
    Kernel& sc = push(kind, phase, layer, "attn_scores", rows, d, seq);
    sc.act_bytes = add_ck(mul_ck(mul_ck(rows, d), ab), mul_ck(cache, ab));
    sc.flops = mul_ck(2, mul_ck(rows, mul_ck(d, seq)));

    Kernel& sm = push(KernelKind::softmax, phase, layer, "attn_softmax", mul_ck(rows, heads),
                      1, seq);
    sm.flops = mul_ck(5, mul_ck(sm.m, seq));

    Kernel& cx = push(kind, phase, layer, "attn_context", rows, seq, d);
    cx.act_bytes = mul_ck(cache, ab);
    cx.out_bytes = mul_ck(mul_ck(rows, d), ab);
    cx.flops = mul_ck(2, mul_ck(rows, mul_ck(seq, d)));
  }

  void elementwise(Phase phase, int layer, const std::string& name, uint64_t rows,
                   uint64_t width) {
    Kernel& kn = push(KernelKind::elementwise, phase, layer, name, rows, 1, width);
    kn.flops = mul_ck(2, mul_ck(rows, width));
  }
};

}  // namespace

const char* to_string(Phase p) {
  switch (p) {
    case Phase::encode: return "encode";
    case Phase::prefill: return "prefill";
    case Phase::decode: return "decode";
  }
  return "?";
}

const char* to_string(KernelKind k) {
  switch (k) {
    case KernelKind::gemm: return "gemm";
    case KernelKind::gemv: return "gemv";
    case KernelKind::elementwise: return "elementwise";
    case KernelKind::softmax: return "softmax";
  }
  return "?";
}

uint64_t ModelConfig::llm_stream_weights() const {
  uint64_t d = d_model, f = d_ffn, kv = d_kv();
  uint64_t per_layer = d * (d + 2 * kv) + d * d + 3 * d * f;
  return uint64_t(llm_layers) * per_layer + uint64_t(d) * vocab_size;
}

uint64_t ModelConfig::llm_ffn_weights() const {
  return uint64_t(llm_layers) * 3 * uint64_t(d_model) * d_ffn;
}

uint64_t Scenario::resolved_encoder_tokens(const ModelConfig& m) const {
  if (encoder_tokens > 0) return encoder_tokens;
  return input_tokens * uint64_t(m.projector_pool_factor);
}

PhaseTotals OperatorGraph::totals(Phase p) const {
  PhaseTotals t;
  for (const Kernel& k : kernels) {
    if (k.phase != p) continue;
    t.flops = add_ck(t.flops, k.flops);
    t.weight_bytes = add_ck(t.weight_bytes, k.weight_bytes);
    t.act_bytes = add_ck(t.act_bytes, k.act_bytes);
    t.out_bytes = add_ck(t.out_bytes, k.out_bytes);
  }
  return t;
}

uint64_t OperatorGraph::decode_iteration_weight_bytes() const {
  if (decode_iter_start.empty()) return 0;
  size_t begin = decode_iter_start[0];
  size_t end = decode_iter_start.size() > 1 ? decode_iter_start[1] : kernels.size();
  uint64_t bytes = 0;
  for (size_t i = begin; i < end; i++) bytes += kernels[i].weight_bytes;
  return bytes;
}

OperatorGraph build_graph(const ModelConfig& model, const Scenario& scen) {
  if (model.llm_layers < 1 || model.d_model < 1 || model.d_ffn < 1 || model.heads < 1 ||
      model.kv_heads < 1 || model.vocab_size < 1)
    throw std::invalid_argument("model dimensions must be positive");
  if (model.d_model % model.heads != 0)
    throw std::invalid_argument("d_model must be divisible by heads");
  if (model.heads % model.kv_heads != 0)
    throw std::invalid_argument("heads must be divisible by kv_heads");
  if (scen.input_tokens < 1 || scen.output_tokens < 1 || scen.batch < 1)
    throw std::invalid_argument("scenario token/batch counts must be positive");

  uint64_t s_enc = scen.resolved_encoder_tokens(model);
  uint64_t l_in = scen.input_tokens;
  uint64_t l_out = scen.output_tokens;
  uint64_t batch = scen.batch;
  if (l_in > max_tokens || l_out > max_tokens || s_enc > max_tokens ||
      add_ck(l_in, l_out) > max_tokens)
    throw std::overflow_error("token count exceeds supported range (2^20)");
  if (batch > max_batch) throw std::overflow_error("batch exceeds supported range (2^16)");

  GraphBuilder b(model);
  uint64_t de = model.encoder_d_model;
  uint64_t d = model.d_model;
  uint64_t d_kv = model.d_kv();
  uint64_t f = model.d_ffn;

  // --- encode: vision tower + projector, runs once per request.
  b.proj(KernelKind::gemm, Phase::encode, -1, "patch_embed", s_enc, model.encoder_patch_dim, de);
  for (int L = 0; L < model.encoder_layers; L++) {
    b.proj(KernelKind::gemm, Phase::encode, L, "qkv_proj", s_enc, de, 3 * de);
    b.attention(Phase::encode, L, s_enc, 1, s_enc, de, de, model.encoder_heads, KernelKind::gemm);
    b.proj(KernelKind::gemm, Phase::encode, L, "out_proj", s_enc, de, de);
    b.proj(KernelKind::gemm, Phase::encode, L, "ffn_up", s_enc, de, model.encoder_ffn_mult * de);
    b.elementwise(Phase::encode, L, "ffn_act", s_enc, model.encoder_ffn_mult * de);
    b.proj(KernelKind::gemm, Phase::encode, L, "ffn_down", s_enc, model.encoder_ffn_mult * de, de);
  }
  uint64_t pool = model.projector_pool_factor;
  uint64_t vis_tokens = s_enc / pool > 0 ? s_enc / pool : 1;
  b.proj(KernelKind::gemm, Phase::encode, -1, "projector", vis_tokens, pool * de, d);
  b.g.encode_count = b.g.kernels.size();

  // --- prefill: all prompt tokens through the LLM, KV cache written as the
  // qkv output.  Pruning stays off here: a whole prompt's channel union keeps
  // effectively every weight live.
  for (int L = 0; L < model.llm_layers; L++) {
    b.proj(KernelKind::gemm, Phase::prefill, L, "qkv_proj", l_in, d, d + 2 * d_kv);
    b.attention(Phase::prefill, L, l_in, 1, l_in, d, d_kv, model.heads, KernelKind::gemm);
    b.proj(KernelKind::gemm, Phase::prefill, L, "out_proj", l_in, d, d);
    b.proj(KernelKind::gemm, Phase::prefill, L, "ffn_up", l_in, d, f);
    b.proj(KernelKind::gemm, Phase::prefill, L, "ffn_gate", l_in, d, f);
    b.elementwise(Phase::prefill, L, "ffn_gate_mul", l_in, f);
    b.proj(KernelKind::gemm, Phase::prefill, L, "ffn_down", l_in, f, d);
  }
  b.g.prefill_count = b.g.kernels.size() - b.g.encode_count;

  // --- decode: one iteration per generated token.  Weight matrices are
  // fetched once per iteration and reused across the `batch` streams, so
  // GEMV kernels carry m = batch rows; KV caches are per stream.
  for (uint64_t t = 0; t < l_out; t++) {
    b.g.decode_iter_start.push_back(b.g.kernels.size());
    uint64_t seq = l_in + t + 1;  // cache length including the current token
    for (int L = 0; L < model.llm_layers; L++) {
      b.proj(KernelKind::gemv, Phase::decode, L, "qkv_proj", batch, d, d + 2 * d_kv);
      b.attention(Phase::decode, L, batch, batch, seq, d, d_kv, model.heads, KernelKind::gemv);
      b.proj(KernelKind::gemv, Phase::decode, L, "out_proj", batch, d, d);
      b.proj(KernelKind::gemv, Phase::decode, L, "ffn_up", batch, d, f, PruneVec::vx);
      b.proj(KernelKind::gemv, Phase::decode, L, "ffn_gate", batch, d, f, PruneVec::vx);
      b.elementwise(Phase::decode, L, "ffn_gate_mul", batch, f);
      b.proj(KernelKind::gemv, Phase::decode, L, "ffn_down", batch, f, d, PruneVec::vd);
    }
    b.proj(KernelKind::gemv, Phase::decode, -1, "lm_head", batch, d, model.vocab_size);
  }
  return std::move(b.g);
}

void dump_graph(const OperatorGraph& g, std::ostream& os) {
  for (const Kernel& k : g.kernels) {
    os << to_string(k.phase) << " L" << k.layer_index << " " << k.name << " "
       << to_string(k.kind) << " m=" << k.m << " k=" << k.k << " n=" << k.n
       << " w_bytes=" << k.weight_bytes << " act_bytes=" << k.act_bytes
       << " out_bytes=" << k.out_bytes << " flops=" << k.flops;
    if (k.prunable()) os << " prunable=" << (k.prune == PruneVec::vx ? "vx" : "vd");
    os << "\n";
  }
}

ModelConfig model_from_config(const ConfigMap& cfg) {
  ModelConfig m;
  m.name = cfg.get_str("model.name", m.name);
  m.encoder_layers = int(cfg.get_int("model.encoder.layers", m.encoder_layers));
  m.encoder_d_model = int(cfg.get_int("model.encoder.d_model", m.encoder_d_model));
  m.encoder_heads = int(cfg.get_int("model.encoder.heads", m.encoder_heads));
  m.encoder_ffn_mult = int(cfg.get_int("model.encoder.ffn_mult", m.encoder_ffn_mult));
  m.encoder_patch_dim = int(cfg.get_int("model.encoder.patch_dim", m.encoder_patch_dim));
  m.encoder_activation =
      activation_from_string(cfg.get_str("model.encoder.activation", activation_name(m.encoder_activation)));
  m.projector_pool_factor = int(cfg.get_int("model.projector.pool_factor", m.projector_pool_factor));
  m.llm_layers = int(cfg.get_int("model.llm.layers", m.llm_layers));
  m.d_model = int(cfg.get_int("model.llm.d_model", m.d_model));
  m.d_ffn = int(cfg.get_int("model.llm.d_ffn", m.d_ffn));
  m.heads = int(cfg.get_int("model.llm.heads", m.heads));
  m.kv_heads = int(cfg.get_int("model.llm.kv_heads", m.kv_heads));
  m.vocab_size = int(cfg.get_int("model.llm.vocab_size", m.vocab_size));
  m.activation_fn = activation_from_string(cfg.get_str("model.llm.activation", activation_name(m.activation_fn)));
  m.weight_bytes_per_elem = int(cfg.get_int("model.weight_bytes_per_elem", m.weight_bytes_per_elem));
  m.act_bytes_per_elem = int(cfg.get_int("model.act_bytes_per_elem", m.act_bytes_per_elem));
  return m;
}

ConfigMap model_to_config(const ModelConfig& m) {
  ConfigMap cfg;
  cfg.set_str("model.name", m.name);
  cfg.set_int("model.encoder.layers", m.encoder_layers);
  cfg.set_int("model.encoder.d_model", m.encoder_d_model);
  cfg.set_int("model.encoder.heads", m.encoder_heads);
  cfg.set_int("model.encoder.ffn_mult", m.encoder_ffn_mult);
  cfg.set_int("model.encoder.patch_dim", m.encoder_patch_dim);
  cfg.set_str("model.encoder.activation", activation_name(m.encoder_activation));
  cfg.set_int("model.projector.pool_factor", m.projector_pool_factor);
  cfg.set_int("model.llm.layers", m.llm_layers);
  cfg.set_int("model.llm.d_model", m.d_model);
  cfg.set_int("model.llm.d_ffn", m.d_ffn);
  cfg.set_int("model.llm.heads", m.heads);
  cfg.set_int("model.llm.kv_heads", m.kv_heads);
  cfg.set_int("model.llm.vocab_size", m.vocab_size);
  cfg.set_str("model.llm.activation", activation_name(m.activation_fn));
  cfg.set_int("model.weight_bytes_per_elem", m.weight_bytes_per_elem);
  cfg.set_int("model.act_bytes_per_elem", m.act_bytes_per_elem);
  return cfg;
}

namespace {

BandwidthPolicy policy_from_string(const std::string& s) {
  if (s == "equal") return BandwidthPolicy::equal;
  if (s == "fixed") return BandwidthPolicy::fixed;
  if (s == "dynamic") return BandwidthPolicy::dynamic;
  throw std::runtime_error("unknown bandwidth policy '" + s + "'");
}

const char* policy_name(BandwidthPolicy p) {
  switch (p) {
    case BandwidthPolicy::equal: return "equal";
    case BandwidthPolicy::fixed: return "fixed";
    case BandwidthPolicy::dynamic: return "dynamic";
  }
  return "?";
}

}  // namespace

Scenario scenario_from_config(const ConfigMap& cfg) {
  Scenario s;
  s.id = cfg.get_str("scenario.id", s.id);
  std::string mode = cfg.get_str("scenario.mode", "pipeline");
  if (mode == "pipeline") s.mode = ScenarioMode::pipeline;
  else if (mode == "compare") s.mode = ScenarioMode::compare;
  else throw std::runtime_error("unknown scenario mode '" + mode + "'");
  s.input_tokens = cfg.get_u64("scenario.input_tokens", s.input_tokens);
  s.encoder_tokens = cfg.get_u64("scenario.encoder_tokens", s.encoder_tokens);
  s.output_tokens = cfg.get_u64("scenario.output_tokens", s.output_tokens);
  s.batch = cfg.get_u64("scenario.batch", s.batch);
  s.policy = policy_from_string(cfg.get_str("scenario.policy", policy_name(s.policy)));
  std::string ratio = cfg.get_str("scenario.fixed_ratio", "1:1");
  size_t colon = ratio.find(':');
  if (colon == std::string::npos)
    throw std::runtime_error("scenario.fixed_ratio must look like '1:3'");
  s.fixed_ratio_cc = std::stoi(ratio.substr(0, colon));
  s.fixed_ratio_mc = std::stoi(ratio.substr(colon + 1));
  if (s.fixed_ratio_cc < 1 || s.fixed_ratio_mc < 1)
    throw std::runtime_error("scenario.fixed_ratio parts must be >= 1");
  s.prune.enabled = cfg.get_bool("scenario.prune.enabled", s.prune.enabled);
  s.prune.t = cfg.get_real("scenario.prune.t", s.prune.t);
  s.prune.cores = int(cfg.get_int("scenario.prune.cores", s.prune.cores));
  s.prune.skip_first_layer = cfg.get_bool("scenario.prune.skip_first_layer", s.prune.skip_first_layer);
  s.prune.prune_vd = cfg.get_bool("scenario.prune.prune_vd", s.prune.prune_vd);
  s.prune.uniform_ratio = cfg.get_real("scenario.prune.ratio", s.prune.uniform_ratio);
  s.prune.trace_path = cfg.get_str("scenario.prune.trace", s.prune.trace_path);
  s.seed = cfg.get_u64("scenario.seed", s.seed);
  return s;
}

ConfigMap scenario_to_config(const Scenario& s) {
  ConfigMap cfg;
  cfg.set_str("scenario.id", s.id);
  cfg.set_str("scenario.mode", s.mode == ScenarioMode::pipeline ? "pipeline" : "compare");
  cfg.set_u64("scenario.input_tokens", s.input_tokens);
  if (s.encoder_tokens > 0) cfg.set_u64("scenario.encoder_tokens", s.encoder_tokens);
  cfg.set_u64("scenario.output_tokens", s.output_tokens);
  cfg.set_u64("scenario.batch", s.batch);
  cfg.set_str("scenario.policy", policy_name(s.policy));
  cfg.set_str("scenario.fixed_ratio",
              std::to_string(s.fixed_ratio_cc) + ":" + std::to_string(s.fixed_ratio_mc));
  cfg.set_bool("scenario.prune.enabled", s.prune.enabled);
  cfg.set_real("scenario.prune.t", s.prune.t);
  cfg.set_int("scenario.prune.cores", s.prune.cores);
  cfg.set_bool("scenario.prune.skip_first_layer", s.prune.skip_first_layer);
  cfg.set_bool("scenario.prune.prune_vd", s.prune.prune_vd);
  if (s.prune.uniform_ratio >= 0) cfg.set_real("scenario.prune.ratio", s.prune.uniform_ratio);
  if (!s.prune.trace_path.empty()) cfg.set_str("scenario.prune.trace", s.prune.trace_path);
  cfg.set_u64("scenario.seed", s.seed);
  return cfg;
}

double apply_activation(Activation a, double x) {
  switch (a) {
    case Activation::relu: return x > 0 ? x : 0.0;
    case Activation::silu: return x / (1.0 + std::exp(-x));
    case Activation::gelu: return 0.5 * x * (1.0 + std::erf(x / std::sqrt(2.0)));
  }
  return x;
}

std::vector<double> ffn_reference(const std::vector<double>& v, const MatrixF& w_up,
                                  const MatrixF& w_gate, const MatrixF& w_down,
                                  Activation act) {
  if (w_up.cols != v.size() || w_gate.cols != v.size() || w_up.rows != w_gate.rows ||
      w_down.cols != w_up.rows)
    throw std::invalid_argument("ffn_reference: dimension mismatch");
  size_t d_ffn = w_up.rows, d_model = w_down.rows;
  std::vector<double> h(d_ffn);
  for (size_t i = 0; i < d_ffn; i++) {
    double up = 0, gate = 0;
    const double* ur = &w_up.d[i * w_up.cols];
    const double* gr = &w_gate.d[i * w_gate.cols];
    for (size_t j = 0; j < v.size(); j++) {
      up += ur[j] * v[j];
      gate += gr[j] * v[j];
    }
    h[i] = up * apply_activation(act, gate);
  }
  std::vector<double> out(d_model);
  for (size_t i = 0; i < d_model; i++) {
    double acc = 0;
    const double* dr = &w_down.d[i * w_down.cols];
    for (size_t j = 0; j < d_ffn; j++) acc += dr[j] * h[j];
    out[i] = acc;
  }
  return out;
}

}  // namespace hetsim
