#include "hetsim/pruning.h"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <numeric>
#include <random>
#include <stdexcept>
#include <thread>

namespace hetsim {

namespace {

void require(bool cond, const char* msg) {
  if (!cond) throw std::invalid_argument(msg);
}

// Contiguous per-core slice bounds for d channels over `cores` slices.
std::pair<uint64_t, uint64_t> slice_bounds(uint64_t d, int cores, int core) {
  uint64_t base = d / cores, rem = d % cores;
  uint64_t begin = core * base + std::min<uint64_t>(core, rem);
  uint64_t len = base + (uint64_t(core) < rem ? 1 : 0);
  return {begin, begin + len};
}

// Indices of the `keep` largest |v|, ties to the lower index, ascending.
std::vector<uint32_t> top_magnitude(std::span<const double> v, uint64_t keep) {
  std::vector<uint32_t> idx(v.size());
  std::iota(idx.begin(), idx.end(), 0);
  if (keep >= v.size()) return idx;
  auto cmp = [&](uint32_t a, uint32_t b) {
    double ma = std::fabs(v[a]), mb = std::fabs(v[b]);
    if (ma != mb) return ma > mb;
    return a < b;
  };
  std::nth_element(idx.begin(), idx.begin() + keep, idx.end(), cmp);
  idx.resize(keep);
  std::sort(idx.begin(), idx.end());
  return idx;
}

}  // namespace

void PruningState::reset_token(uint64_t d_local_channels) {
  require(d_local_channels >= 1, "reset_token: slice must hold at least one channel");
  d_local = d_local_channels;
  k = d_local_channels;
  layer_index = 0;
  mask.assign(d_local_channels, 1);
  realized_ratio = 0.0;
}

std::vector<uint32_t> dynamic_topk_step(std::span<const double> v, PruningState& st,
                                        const PruneParams& p) {
  require(!v.empty(), "dynamic_topk_step: empty activation slice");
  require(st.d_local == v.size(), "dynamic_topk_step: state not reset for this slice width");
  require(p.t > 0, "dynamic_topk_step: threshold divisor must be positive");

  // Selection happens with the k carried in from earlier layers; the
  // threshold count only updates k for the layers after this one.
  uint64_t k_sel = (st.layer_index == 0 && p.skip_first_layer) ? st.d_local : st.k;

  double vmax = 0.0;
  for (double x : v) vmax = std::max(vmax, std::fabs(x));

  std::vector<uint32_t> selected;
  uint64_t k_next;
  if (vmax == 0.0) {
    // Nothing distinguishes the channels; skip the GEMV entirely but keep a
    // one-channel floor so later layers are never asked for an empty top-k.
    k_next = 1;
    st.realized_ratio = 1.0;
  } else {
    selected = top_magnitude(v, k_sel);
    double threshold = vmax / p.t;
    uint64_t n = 0;
    for (double x : v)
      if (std::fabs(x) > threshold) n++;
    k_next = std::max<uint64_t>(std::min(k_sel, n), 1);
    st.realized_ratio = 1.0 - double(selected.size()) / double(st.d_local);
  }

  st.k = k_next;
  st.layer_index++;
  std::fill(st.mask.begin(), st.mask.end(), 0);
  for (uint32_t i : selected) st.mask[i] = 1;
  return selected;
}

double kurtosis(std::span<const double> v) {
  if (v.size() < 2) throw std::invalid_argument("kurtosis: need at least two samples");
  double mean = 0.0;
  for (double x : v) mean += x;
  mean /= double(v.size());
  double m2 = 0.0, m4 = 0.0;
  for (double x : v) {
    double d = x - mean, d2 = d * d;
    m2 += d2;
    m4 += d2 * d2;
  }
  m2 /= double(v.size());
  m4 /= double(v.size());
  if (m2 == 0.0) throw std::invalid_argument("kurtosis: zero variance");
  return m4 / (m2 * m2);
}

double cosine_similarity(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size() || a.empty())
    throw std::invalid_argument("cosine_similarity: size mismatch or empty");
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (size_t i = 0; i < a.size(); i++) {
    dot += a[i] * b[i];
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  if (na == 0.0 || nb == 0.0) return 0.0;
  return dot / (std::sqrt(na) * std::sqrt(nb));
}

namespace {

// Expected Pearson kurtosis of unit noise plus a fraction p of channels
// offset by +-A: m2 = 1 + p A^2, m4 = 3 + p (6 A^2 + A^4).  Strictly
// increasing in A for p < 1/3, from 3 (A = 0) toward 1/p.
double mixture_kurtosis(double a2, double p) {
  double m2 = 1.0 + p * a2;
  double m4 = 3.0 + p * (6.0 * a2 + a2 * a2);
  return m4 / (m2 * m2);
}

double solve_outlier_amplitude(double target, double p) {
  require(p > 0 && p < 1.0 / 3.0, "synth_trace: outlier fraction must be in (0, 1/3)");
  double hi = 1.0;
  while (mixture_kurtosis(hi, p) < target) {
    hi *= 2.0;
    if (hi > 1e18)
      throw std::invalid_argument("synth_trace: kurtosis target above the 1/fraction ceiling");
  }
  if (target < 3.0)
    throw std::invalid_argument("synth_trace: kurtosis target below the Gaussian floor of 3");
  double lo = 0.0;
  for (int it = 0; it < 200; it++) {
    double mid = 0.5 * (lo + hi);
    (mixture_kurtosis(mid, p) < target ? lo : hi) = mid;
  }
  return std::sqrt(0.5 * (lo + hi));
}

void fill_layer_vectors(std::vector<std::vector<double>>& rows, int layers, int tokens, int d,
                        std::span<const double> schedule, double frac, std::mt19937_64& layout_rng,
                        uint64_t seed, uint64_t stream_tag) {
  int n_out = std::max(1, int(std::lround(frac * d)));
  double p = double(n_out) / d;
  std::normal_distribution<double> gauss(0.0, 1.0);

  // One outlier channel set (and signs) shared by every layer: the same
  // channels grow more prominent as the schedule rises, so a channel that
  // fell below the selection at one layer stays droppable at the next.  Only
  // the Gaussian noise is redrawn per token and layer.
  std::vector<uint32_t> chan(d);
  std::iota(chan.begin(), chan.end(), 0);
  std::shuffle(chan.begin(), chan.end(), layout_rng);
  chan.resize(n_out);
  std::vector<int> sign(n_out);
  for (int i = 0; i < n_out; i++) sign[i] = (layout_rng() & 1) ? 1 : -1;

  for (int l = 0; l < layers; l++) {
    double amp = solve_outlier_amplitude(schedule[l], p);

    for (int tok = 0; tok < tokens; tok++) {
      std::mt19937_64 rng(seed ^ (stream_tag * 0x9e3779b97f4a7c15ULL) ^
                          (uint64_t(l) << 32) ^ uint64_t(tok));
      std::vector<double>& v = rows[size_t(tok) * layers + l];
      v.resize(d);
      for (int c = 0; c < d; c++) v[c] = gauss(rng);
      for (int i = 0; i < n_out; i++) v[chan[i]] += sign[i] * amp;
    }
  }
}

}  // namespace

ActivationTrace synth_trace(int layers, int d_model, int d_ffn, int tokens,
                            std::span<const double> kurtosis_schedule, uint64_t seed,
                            double outlier_fraction) {
  require(layers >= 1 && d_model >= 2 && d_ffn >= 2 && tokens >= 1,
          "synth_trace: degenerate dimensions");
  require(kurtosis_schedule.size() == size_t(layers),
          "synth_trace: schedule must list one kurtosis target per layer");

  ActivationTrace t;
  t.model_name = "synthetic";
  t.layers = layers;
  t.d_model = d_model;
  t.d_ffn = d_ffn;
  t.tokens = tokens;
  t.vx.resize(size_t(tokens) * layers);
  t.vd.resize(size_t(tokens) * layers);

  std::mt19937_64 layout_rng(seed * 0x2545f4914f6cdd1dULL + 1);
  fill_layer_vectors(t.vx, layers, tokens, d_model, kurtosis_schedule, outlier_fraction,
                     layout_rng, seed, 1);
  fill_layer_vectors(t.vd, layers, tokens, d_ffn, kurtosis_schedule, outlier_fraction,
                     layout_rng, seed, 2);
  return t;
}

namespace {

// Steps per-core state machines over one token's layer sequence, returning
// the full-width mask for each layer.
struct SlicedPruner {
  std::vector<PruningState> states;
  int cores;

  SlicedPruner(uint64_t d, int cores_) : states(cores_), cores(cores_) {
    for (int c = 0; c < cores; c++) {
      auto [b, e] = slice_bounds(d, cores, c);
      states[c].reset_token(e - b);
    }
  }

  // Returns the mask; `ratio` receives the slice-weighted realized ratio.
  std::vector<uint8_t> step(std::span<const double> v, const PruneParams& p, double& ratio) {
    std::vector<uint8_t> mask(v.size(), 0);
    uint64_t selected = 0;
    for (int c = 0; c < cores; c++) {
      auto [b, e] = slice_bounds(v.size(), cores, c);
      auto sel = dynamic_topk_step(v.subspan(b, e - b), states[c], p);
      selected += sel.size();
      for (uint32_t i : sel) mask[b + i] = 1;
    }
    ratio = 1.0 - double(selected) / double(v.size());
    return mask;
  }
};

}  // namespace

RatioProfile dynamic_ratios(const ActivationTrace& trace, const PruneParams& p) {
  require(p.cores >= 1, "dynamic_ratios: cores must be >= 1");
  require(trace.d_model >= p.cores && trace.d_ffn >= p.cores,
          "dynamic_ratios: more cores than channels");
  RatioProfile prof;
  prof.ratio_vx.assign(trace.layers, 0.0);
  prof.ratio_vd.assign(trace.layers, 0.0);
  for (int tok = 0; tok < trace.tokens; tok++) {
    SlicedPruner px(trace.d_model, p.cores);
    SlicedPruner pd(trace.d_ffn, p.cores);
    for (int l = 0; l < trace.layers; l++) {
      double rx = 0, rd = 0;
      px.step(trace.vx_at(tok, l), p, rx);
      pd.step(trace.vd_at(tok, l), p, rd);
      prof.ratio_vx[l] += rx;
      prof.ratio_vd[l] += rd;
    }
  }
  for (int l = 0; l < trace.layers; l++) {
    prof.ratio_vx[l] /= trace.tokens;
    prof.ratio_vd[l] /= trace.tokens;
    prof.mean_vx += prof.ratio_vx[l];
    prof.mean_vd += prof.ratio_vd[l];
  }
  prof.mean_vx /= trace.layers;
  prof.mean_vd /= trace.layers;
  return prof;
}

FfnWeights FfnWeights::random(int d_model, int d_ffn, uint64_t seed) {
  require(d_model >= 1 && d_ffn >= 1, "FfnWeights::random: degenerate dimensions");
  FfnWeights w;
  w.up = MatrixF(d_ffn, d_model);
  w.gate = MatrixF(d_ffn, d_model);
  w.down = MatrixF(d_model, d_ffn);
  std::mt19937_64 rng(seed);
  // Variance-scaled init keeps intermediate magnitudes O(1) at any width.
  std::normal_distribution<double> nu(0.0, 1.0 / std::sqrt(double(d_model)));
  std::normal_distribution<double> nd(0.0, 1.0 / std::sqrt(double(d_ffn)));
  for (double& x : w.up.d) x = nu(rng);
  for (double& x : w.gate.d) x = nu(rng);
  for (double& x : w.down.d) x = nd(rng);
  return w;
}

namespace {

std::vector<double> apply_mask(const std::vector<double>& v, const std::vector<uint8_t>& mask) {
  std::vector<double> out(v.size());
  for (size_t i = 0; i < v.size(); i++) out[i] = mask[i] ? v[i] : 0.0;
  return out;
}

std::vector<uint8_t> fixed_ratio_mask(const std::vector<double>& v, double prune_ratio) {
  uint64_t keep = std::max<int64_t>(1, std::llround((1.0 - prune_ratio) * double(v.size())));
  auto idx = top_magnitude(v, std::min<uint64_t>(keep, v.size()));
  std::vector<uint8_t> mask(v.size(), 0);
  for (uint32_t i : idx) mask[i] = 1;
  return mask;
}

// Gated FFN with an optional mask applied to the intermediate vector before
// the down projection.
std::vector<double> ffn_intermediate_masked(const std::vector<double>& v, const FfnWeights& w,
                                            Activation act, SlicedPruner* vd_pruner,
                                            const PruneParams& p, double* vd_ratio) {
  size_t d_ffn = w.up.rows;
  std::vector<double> h(d_ffn);
  for (size_t i = 0; i < d_ffn; i++) {
    double up = 0, gate = 0;
    const double* ur = &w.up.d[i * w.up.cols];
    const double* gr = &w.gate.d[i * w.gate.cols];
    for (size_t j = 0; j < v.size(); j++) {
      up += ur[j] * v[j];
      gate += gr[j] * v[j];
    }
    h[i] = up * apply_activation(act, gate);
  }
  if (vd_pruner) {
    double r = 0;
    auto mask = vd_pruner->step(h, p, r);
    if (vd_ratio) *vd_ratio = r;
    h = apply_mask(h, mask);
  }
  std::vector<double> out(w.down.rows);
  for (size_t i = 0; i < w.down.rows; i++) {
    double acc = 0;
    const double* dr = &w.down.d[i * w.down.cols];
    for (size_t j = 0; j < d_ffn; j++) acc += dr[j] * h[j];
    out[i] = acc;
  }
  return out;
}

}  // namespace

FidelityReport pruned_ffn_eval(const ActivationTrace& trace, const FfnWeights& w,
                               const PruneParams& p, const ModelConfig& model, int jobs) {
  require(int(w.up.cols) == trace.d_model && int(w.up.rows) == trace.d_ffn,
          "pruned_ffn_eval: weight/trace dimension mismatch");
  require(jobs >= 1, "pruned_ffn_eval: jobs must be >= 1");
  Activation act = model.activation_fn;

  struct Acc {
    double cos_dyn = 0, cos_lo = 0, cos_hi = 0, rx = 0, rd = 0;
  };
  FidelityReport rep;
  std::vector<std::vector<Acc>> per_token(trace.tokens, std::vector<Acc>(trace.layers));

  auto run_token = [&](int tok) {
    SlicedPruner vx_pruner(trace.d_model, p.cores);
    SlicedPruner vd_pruner(trace.d_ffn, p.cores);
    for (int l = 0; l < trace.layers; l++) {
      const std::vector<double>& v = trace.vx_at(tok, l);
      Acc& a = per_token[tok][l];

      auto dense = ffn_reference(v, w.up, w.gate, w.down, act);

      double rx = 0, rd = 0;
      auto mask = vx_pruner.step(v, p, rx);
      auto v_dyn = apply_mask(v, mask);
      std::vector<double> out_dyn;
      if (p.prune_vd) {
        out_dyn = ffn_intermediate_masked(v_dyn, w, act, &vd_pruner, p, &rd);
      } else {
        out_dyn = ffn_reference(v_dyn, w.up, w.gate, w.down, act);
        // Track what the intermediate pruner would have decided so the
        // reported vd ratio stays meaningful.
        auto h = trace.vd_at(tok, l);
        vd_pruner.step(h, p, rd);
      }
      a.cos_dyn = cosine_similarity(dense, out_dyn);
      a.rx = rx;
      a.rd = rd;

      auto out_lo = ffn_reference(apply_mask(v, fixed_ratio_mask(v, rep.fixed_low_ratio)),
                                  w.up, w.gate, w.down, act);
      auto out_hi = ffn_reference(apply_mask(v, fixed_ratio_mask(v, rep.fixed_high_ratio)),
                                  w.up, w.gate, w.down, act);
      a.cos_lo = cosine_similarity(dense, out_lo);
      a.cos_hi = cosine_similarity(dense, out_hi);
    }
  };

  if (jobs == 1) {
    for (int tok = 0; tok < trace.tokens; tok++) run_token(tok);
  } else {
    std::vector<std::thread> pool;
    std::atomic<int> next{0};
    int workers = std::min(jobs, trace.tokens);
    for (int i = 0; i < workers; i++)
      pool.emplace_back([&] {
        for (int tok = next.fetch_add(1); tok < trace.tokens; tok = next.fetch_add(1))
          run_token(tok);
      });
    for (auto& th : pool) th.join();
  }

  rep.layers.assign(trace.layers, LayerFidelity{});
  for (int l = 0; l < trace.layers; l++) {
    LayerFidelity& lf = rep.layers[l];
    for (int tok = 0; tok < trace.tokens; tok++) {
      const Acc& a = per_token[tok][l];
      lf.cos_dynamic += a.cos_dyn;
      lf.cos_fixed_low += a.cos_lo;
      lf.cos_fixed_high += a.cos_hi;
      lf.ratio_vx += a.rx;
      lf.ratio_vd += a.rd;
    }
    lf.cos_dynamic /= trace.tokens;
    lf.cos_fixed_low /= trace.tokens;
    lf.cos_fixed_high /= trace.tokens;
    lf.ratio_vx /= trace.tokens;
    lf.ratio_vd /= trace.tokens;
    rep.mean_cos_dynamic += lf.cos_dynamic;
    rep.mean_cos_fixed_low += lf.cos_fixed_low;
    rep.mean_cos_fixed_high += lf.cos_fixed_high;
    rep.mean_ratio_vx += lf.ratio_vx;
    rep.mean_ratio_vd += lf.ratio_vd;
  }
  rep.mean_cos_dynamic /= trace.layers;
  rep.mean_cos_fixed_low /= trace.layers;
  rep.mean_cos_fixed_high /= trace.layers;
  rep.mean_ratio_vx /= trace.layers;
  rep.mean_ratio_vd /= trace.layers;
  return rep;
}

OperatorGraph traffic_reduction(const OperatorGraph& g, std::span<const double> ratio_vx,
                                std::span<const double> ratio_vd, bool prune_vd) {
  for (double r : ratio_vx)
    require(r >= 0.0 && r <= 1.0, "traffic_reduction: vx ratio out of [0, 1]");
  for (double r : ratio_vd)
    require(r >= 0.0 && r <= 1.0, "traffic_reduction: vd ratio out of [0, 1]");

  OperatorGraph out = g;
  for (Kernel& kn : out.kernels) {
    if (kn.phase != Phase::decode || !kn.prunable()) continue;
    std::span<const double> ratios = (kn.prune == PruneVec::vx) ? ratio_vx : ratio_vd;
    if (kn.prune == PruneVec::vd && !prune_vd) continue;
    require(kn.layer_index >= 0 && size_t(kn.layer_index) < ratios.size(),
            "traffic_reduction: missing ratio for a prunable layer");
    double keep = 1.0 - ratios[kn.layer_index];
    kn.weight_bytes = uint64_t(std::llround(double(kn.weight_bytes) * keep));
    kn.flops = uint64_t(std::llround(double(kn.flops) * keep));
  }
  return out;
}

}  // namespace hetsim
