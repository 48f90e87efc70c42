#include "dvnee/dvn.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <numeric>
#include <stdexcept>

#include "dvnee/kernels.hpp"

namespace dvnee {

std::string_view to_string(NoiseMode m) {
  switch (m) {
    case NoiseMode::None: return "none";
    case NoiseMode::Random: return "rn";
    case NoiseMode::Swap: return "sn";
    case NoiseMode::SwapLeastConfident: return "snlc";
  }
  return "none";
}

NoiseMode noise_mode_from_string(std::string_view s) {
  if (s == "none") return NoiseMode::None;
  if (s == "rn") return NoiseMode::Random;
  if (s == "sn") return NoiseMode::Swap;
  if (s == "snlc") return NoiseMode::SwapLeastConfident;
  throw std::invalid_argument("unknown noise mode '" + std::string(s) + "'");
}

void DvnConfig::validate() const {
  auto fail = [](const char* field, const char* why) {
    throw std::invalid_argument(std::string("dvn.") + field + ": " + why);
  };
  if (!(alpha >= 0.0) || !std::isfinite(alpha)) fail("alpha", "must be finite and non-negative");
  if (!(swap_fraction >= 0.0 && swap_fraction <= 1.0)) fail("swap_fraction", "must lie in [0,1]");
  if (!(clamp_lo >= 0.0 && clamp_lo < clamp_hi && clamp_hi <= 1.0)) fail("clamp", "need 0 <= lo < hi <= 1");
  if (d_lab == 0) fail("d_lab", "must be positive");
  if (hidden == 0) fail("hidden", "must be positive");
}

ValueNetParams ValueNetParams::create(std::size_t n_types, std::size_t d_tok, const DvnConfig& cfg,
                                      std::mt19937_64& rng) {
  ValueNetParams p;
  p.label_emb = Tensor2(n_types, cfg.d_lab);
  normal_fill(p.label_emb, rng, 1.0);
  // One Glorot limit for the fused first layer, as if it were a single matrix.
  const double limit = std::sqrt(6.0 / static_cast<double>(d_tok + cfg.d_lab + cfg.hidden));
  std::uniform_real_distribution<double> u(-limit, limit);
  p.w_feat = Tensor2(d_tok, cfg.hidden);
  p.w_label = Tensor2(cfg.d_lab, cfg.hidden);
  p.w_context = Tensor2(cfg.d_lab, cfg.hidden);
  for (auto& v : p.w_feat.flat()) v = u(rng);
  for (auto& v : p.w_label.flat()) v = u(rng);
  for (auto& v : p.w_context.flat()) v = u(rng);
  p.bias = Tensor2(1, cfg.hidden);
  p.head = MlpParams::create({cfg.hidden, cfg.hidden, 1}, Activation::Identity, rng);
  return p;
}

ValueNetParams ValueNetParams::zeros_like() const {
  ValueNetParams z;
  z.label_emb = Tensor2(label_emb.rows(), label_emb.cols());
  z.w_feat = Tensor2(w_feat.rows(), w_feat.cols());
  z.w_label = Tensor2(w_label.rows(), w_label.cols());
  z.w_context = Tensor2(w_context.rows(), w_context.cols());
  z.bias = Tensor2(1, bias.cols());
  z.head = head.zeros_like();
  return z;
}

void ValueNetParams::collect(const std::string& prefix, NamedTensors& out) {
  out.emplace_back(prefix + ".label_emb", &label_emb);
  out.emplace_back(prefix + ".w_feat", &w_feat);
  out.emplace_back(prefix + ".w_label", &w_label);
  out.emplace_back(prefix + ".w_context", &w_context);
  out.emplace_back(prefix + ".bias", &bias);
  dvnee::collect(head, prefix + ".head", out);
}

Tensor2 project_features(const ValueNetParams& p, const Tensor2& features) {
  return kernels::matmul(features, p.w_feat);
}

ValueCache value_forward(const ValueNetParams& p, const Tensor2& features, const Tensor2& y,
                         const Tensor2* projected) {
  if (y.rows() != features.rows() || y.cols() != p.label_emb.rows()) {
    throw ShapeError("value: label rows " + shape_string(y) + " do not match features " + shape_string(features));
  }
  ValueCache c;
  c.params = &p;
  c.features = &features;
  c.y = &y;
  const std::size_t n = y.rows();
  const std::size_t hidden = p.bias.cols();
  c.label_rows = kernels::matmul(y, p.label_emb);
  c.pre = projected ? *projected : project_features(p, features);
  kernels::gemm_nn(c.label_rows, p.w_label, c.pre, /*accumulate=*/true);
  // Context: every non-NULL label in the chunk, summed.
  c.context = Tensor2(1, p.label_emb.cols());
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t t = 1; t < y.cols(); ++t) {
      const double w = y(i, t);
      if (w == 0.0) continue;
      for (std::size_t d = 0; d < c.context.cols(); ++d) c.context(0, d) += w * p.label_emb(t, d);
    }
  const Tensor2 ctx = kernels::matmul(c.context, p.w_context);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t k = 0; k < hidden; ++k) c.pre(i, k) += ctx(0, k);
  Tensor2 pooled(1, hidden);
  for (std::size_t i = 0; i < n; ++i) {
    const double* row = c.pre.data() + i * hidden;
    for (std::size_t k = 0; k < hidden; ++k) {
      const double a = row[k] + p.bias(0, k);
      pooled(0, k) += a > 0.0 ? a : 0.0;
    }
  }
  if (n > 0) pooled *= 1.0 / static_cast<double>(n);
  c.head = mlp_forward(p.head, pooled);
  c.logit = c.head.output()(0, 0);
  c.value = logistic(c.logit);
  return c;
}

void value_backward(const ValueNetParams& p, const ValueCache& c, double grad_logit, ValueNetParams* grads,
                    Tensor2* grad_y) {
  if (c.params != &p) throw StaleCacheError("value_backward: cache was produced by a different network");
  const std::size_t n = c.pre.rows();
  const std::size_t hidden = p.bias.cols();
  Tensor2 g_out(1, 1, grad_logit);
  Tensor2 g_pooled;
  MlpParams scratch;
  MlpParams& head_grads = grads ? grads->head : (scratch = p.head.zeros_like());
  mlp_backward(p.head, c.head, g_out, head_grads, &g_pooled);

  Tensor2 g_pre(n, hidden);
  const double inv = n > 0 ? 1.0 / static_cast<double>(n) : 0.0;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t k = 0; k < hidden; ++k)
      if (c.pre(i, k) + p.bias(0, k) > 0.0) g_pre(i, k) = g_pooled(0, k) * inv;

  if (grads) {
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t k = 0; k < hidden; ++k) grads->bias(0, k) += g_pre(i, k);
    kernels::gemm_tn(*c.features, g_pre, grads->w_feat, true);
    kernels::gemm_tn(c.label_rows, g_pre, grads->w_label, true);
  }
  Tensor2 g_ctx_proj(1, hidden);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t k = 0; k < hidden; ++k) g_ctx_proj(0, k) += g_pre(i, k);
  if (grads) kernels::gemm_tn(c.context, g_ctx_proj, grads->w_context, true);
  Tensor2 g_ctx;
  kernels::gemm_nt(g_ctx_proj, p.w_context, g_ctx);

  // The context term reaches every non-NULL column of every row.
  Tensor2 g_label_rows;
  kernels::gemm_nt(g_pre, p.w_label, g_label_rows);
  const Tensor2& y = *c.y;
  if (grads) {
    kernels::gemm_tn(y, g_label_rows, grads->label_emb, true);
    for (std::size_t t = 1; t < y.cols(); ++t) {
      double mass = 0.0;
      for (std::size_t i = 0; i < n; ++i) mass += y(i, t);
      for (std::size_t d = 0; d < g_ctx.cols(); ++d) grads->label_emb(t, d) += mass * g_ctx(0, d);
    }
  }
  if (grad_y) {
    kernels::gemm_nt(g_label_rows, p.label_emb, *grad_y);
    const Tensor2 per_type = kernels::matmul(g_ctx, [&] {
      Tensor2 lt(p.label_emb.cols(), p.label_emb.rows());
      for (std::size_t t = 0; t < lt.cols(); ++t)
        for (std::size_t d = 0; d < lt.rows(); ++d) lt(d, t) = p.label_emb(t, d);
      return lt;
    }());
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t t = 1; t < y.cols(); ++t) (*grad_y)(i, t) += per_type(0, t);
  }
}

double value(const ValueNetParams& p, const Tensor2& features, const Tensor2& y) {
  return value_forward(p, features, y).value;
}

double oracle_relaxed_f1(const Tensor2& y_hat, const Tensor2& y_gold) {
  if (!y_hat.same_shape(y_gold)) throw ShapeError("oracle: " + shape_string(y_hat) + " vs " + shape_string(y_gold));
  double lo = 0.0, hi = 0.0;
  for (std::size_t i = 0; i < y_hat.rows(); ++i) {
    for (std::size_t c = 1; c < y_hat.cols(); ++c) {
      lo += std::min(y_hat(i, c), y_gold(i, c));
      hi += std::max(y_hat(i, c), y_gold(i, c));
    }
  }
  if (lo + hi == 0.0) return 1.0;
  return 2.0 * lo / (lo + hi);
}

double oracle_relaxed_f1(const Tensor2& y_hat, std::span<const std::uint32_t> gold_labels) {
  if (gold_labels.size() != y_hat.rows()) throw ShapeError("oracle: label count does not match rows");
  double lo = 0.0, hi = 0.0;
  for (std::size_t i = 0; i < y_hat.rows(); ++i) {
    for (std::size_t c = 1; c < y_hat.cols(); ++c) {
      const double g = gold_labels[i] == c ? 1.0 : 0.0;
      lo += std::min(y_hat(i, c), g);
      hi += std::max(y_hat(i, c), g);
    }
  }
  if (lo + hi == 0.0) return 1.0;
  return 2.0 * lo / (lo + hi);
}

Tensor2 refine_with(const ValueGradFn& f, const Tensor2& y_init, const DvnConfig& cfg, std::vector<Tensor2>* trace) {
  Tensor2 y = y_init;
  Tensor2 grad(y.rows(), y.cols());
  for (std::size_t t = 0; t < cfg.h; ++t) {
    grad.fill(0.0);
    f(y, grad);
    if (!grad.all_finite()) throw NumericError("refine: non-finite value gradient at step " + std::to_string(t));
    auto yv = y.flat();
    auto gv = grad.flat();
    for (std::size_t i = 0; i < yv.size(); ++i) yv[i] = std::clamp(yv[i] + cfg.alpha * gv[i], cfg.clamp_lo, cfg.clamp_hi);
    if (trace) trace->push_back(y);
  }
  return y;
}

#if defined(__x86_64__) && defined(__GNUC__)
#define DVNEE_SIMD_CLONES __attribute__((target_clones("avx2", "default")))
#else
#define DVNEE_SIMD_CLONES
#endif

namespace {

double activate(Activation a, double z) {
  switch (a) {
    case Activation::Relu: return z > 0.0 ? z : 0.0;
    case Activation::Logistic: return logistic(z);
    case Activation::Identity: break;
  }
  return z;
}

double activation_slope(Activation a, double z, double out) {
  switch (a) {
    case Activation::Relu: return z > 0.0 ? 1.0 : 0.0;
    case Activation::Logistic: return out * (1.0 - out);
    case Activation::Identity: break;
  }
  return 1.0;
}

// Always inlined, so the vector return never crosses an ABI boundary.
#pragma GCC diagnostic push
#pragma GCC diagnostic ignored "-Wpsabi"
using Lanes = double __attribute__((vector_size(32)));

[[gnu::always_inline]] inline Lanes load_lanes(const double* p) {
  Lanes v;
  std::memcpy(&v, p, sizeof v);
  return v;
}

// out[j] = init[j] + sum_r c[r] * m[idx[r] * ld + j], summed in order of r.
// Columns go in tiles of 16 so the partial sums stay in registers.
template <typename Index>
[[gnu::always_inline]] inline void combine_rows(const double* init, const double* c, Index idx, std::size_t rows,
                                                const double* m, std::size_t ld, std::size_t width, double* out) {
  std::size_t j0 = 0;
  for (; j0 + 16 <= width; j0 += 16) {
    Lanes a0 = load_lanes(init + j0), a1 = load_lanes(init + j0 + 4);
    Lanes a2 = load_lanes(init + j0 + 8), a3 = load_lanes(init + j0 + 12);
    for (std::size_t r = 0; r < rows; ++r) {
      const double w = c[r];
      const double* src = m + idx(r) * ld + j0;
      a0 += w * load_lanes(src);
      a1 += w * load_lanes(src + 4);
      a2 += w * load_lanes(src + 8);
      a3 += w * load_lanes(src + 12);
    }
    std::memcpy(out + j0, &a0, sizeof a0);
    std::memcpy(out + j0 + 4, &a1, sizeof a1);
    std::memcpy(out + j0 + 8, &a2, sizeof a2);
    std::memcpy(out + j0 + 12, &a3, sizeof a3);
  }
  for (; j0 + 4 <= width; j0 += 4) {
    Lanes a0 = load_lanes(init + j0);
    for (std::size_t r = 0; r < rows; ++r) {
      const double w = c[r];
      a0 += w * load_lanes(m + idx(r) * ld + j0);
    }
    std::memcpy(out + j0, &a0, sizeof a0);
  }
  if (j0 == width) return;
  const std::size_t rest = width - j0;
  double acc[3];
  for (std::size_t j = 0; j < rest; ++j) acc[j] = init[j0 + j];
  for (std::size_t r = 0; r < rows; ++r) {
    const double w = c[r];
    const double* src = m + idx(r) * ld + j0;
    for (std::size_t j = 0; j < rest; ++j) acc[j] += w * src[j];
  }
  for (std::size_t j = 0; j < rest; ++j) out[j0 + j] = acc[j];
}
#pragma GCC diagnostic pop

// d v / d y for one chunk with everything that does not depend on y folded
// in once:
//   pre_i = (f_i W_f + b) + y_i (L W_y) + sum_{t>=1} m_t (L W_c)_t,  m_t = sum_i y_it.
// Chunk-sized buffers are reused across the steps of one refinement.
class ValueGradient {
 public:
  ValueGradient(const ValueNetParams& p, const LabelTables& tables, const Tensor2& features)
      : p_(p),
        base_(project_features(p, features)),
        label_(tables.label),
        label_t_(tables.label_t),
        context_(tables.context),
        pre_(base_.rows(), base_.cols()) {
    const std::size_t hidden = base_.cols();
    for (std::size_t i = 0; i < base_.rows(); ++i)
      for (std::size_t k = 0; k < hidden; ++k) base_(i, k) += p.bias(0, k);
    mass_.resize(label_.rows());
    shared_.resize(hidden);
    live_g_.resize(hidden);
    live_k_.resize(hidden);
    shared_t_.resize(label_.rows());
    g_sum_.resize(hidden);
    acts_.resize(p.head.layers.size() + 1);
    zs_.resize(p.head.layers.size());
    acts_[0].resize(hidden);
    for (std::size_t l = 0; l < p.head.layers.size(); ++l) {
      zs_[l].resize(p.head.layers[l].weight.cols());
      acts_[l + 1].resize(p.head.layers[l].weight.cols());
    }
  }

  DVNEE_SIMD_CLONES double operator()(const Tensor2& y, Tensor2& grad) {
    const std::size_t n = y.rows(), types = y.cols(), hidden = base_.cols();
    if (n != base_.rows() || types != label_.rows())
      throw ShapeError("value: label rows " + shape_string(y) + " do not match features");
    if (n == 0) return logistic(head_forward());

    std::fill(mass_.begin(), mass_.end(), 0.0);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t t = 1; t < types; ++t) mass_[t] += y(i, t);
    std::vector<double>& pooled = acts_[0];
    std::fill(pooled.begin(), pooled.end(), 0.0);
    for (std::size_t i = 0; i < n; ++i)
      combine_rows(base_.data() + i * hidden, y.data() + i * types, [](std::size_t r) { return r; }, types,
                   label_.data(), hidden, hidden,
                   pre_.data() + i * hidden);
    std::fill(shared_.begin(), shared_.end(), 0.0);
    for (std::size_t t = 1; t < types; ++t) {
      const double* ctx = context_.data() + t * hidden;
      for (std::size_t k = 0; k < hidden; ++k) shared_[k] += mass_[t] * ctx[k];
    }
    for (std::size_t i = 0; i < n; ++i) {
      double* row = pre_.data() + i * hidden;
      for (std::size_t k = 0; k < hidden; ++k) row[k] += shared_[k];
    }
    const double inv = 1.0 / static_cast<double>(n);
    for (std::size_t i = 0; i < n; ++i) {
      const double* row = pre_.data() + i * hidden;
      for (std::size_t k = 0; k < hidden; ++k) pooled[k] += row[k] > 0.0 ? row[k] : 0.0;
    }
    for (auto& v : pooled) v *= inv;

    const double value = logistic(head_forward());
    std::vector<double> g = head_backward(value * (1.0 - value));

    // g now holds d v / d pooled.
    std::fill(g_sum_.begin(), g_sum_.end(), 0.0);
    for (std::size_t i = 0; i < n; ++i) {
      double* row = pre_.data() + i * hidden;  // reused for d v / d pre
      for (std::size_t k = 0; k < hidden; ++k) {
        row[k] = row[k] > 0.0 ? g[k] * inv : 0.0;
        g_sum_[k] += row[k];
      }
    }
    // Context gradient is the same for every row.
    shared_t_[0] = 0.0;
    for (std::size_t t = 1; t < types; ++t) {
      const double* ctx = context_.data() + t * hidden;
      double s = 0.0;
      for (std::size_t k = 0; k < hidden; ++k) s += g_sum_[k] * ctx[k];
      shared_t_[t] = s;
    }
    // Dead units contribute nothing; gather the live ones per row.
    for (std::size_t i = 0; i < n; ++i) {
      const double* gp = pre_.data() + i * hidden;
      std::size_t live = 0;
      for (std::size_t k = 0; k < hidden; ++k) {
        live_k_[live] = k;
        live_g_[live] = gp[k];
        live += gp[k] != 0.0;
      }
      combine_rows(shared_t_.data(), live_g_.data(), [&](std::size_t r) { return live_k_[r]; }, live,
                   label_t_.data(), types, types, grad.data() + i * types);
    }
    return value;
  }

 private:
  double head_forward() {
    const auto& layers = p_.head.layers;
    for (std::size_t l = 0; l < layers.size(); ++l) {
      const Tensor2& w = layers[l].weight;
      const std::vector<double>& in = acts_[l];
      std::vector<double>& z = zs_[l];
      for (std::size_t j = 0; j < w.cols(); ++j) z[j] = layers[l].bias(0, j);
      for (std::size_t i = 0; i < w.rows(); ++i) {
        const double a = in[i];
        const double* wr = w.data() + i * w.cols();
        for (std::size_t j = 0; j < w.cols(); ++j) z[j] += a * wr[j];
      }
      const Activation act = l + 1 == layers.size() ? p_.head.output : p_.head.hidden;
      for (std::size_t j = 0; j < z.size(); ++j) acts_[l + 1][j] = activate(act, z[j]);
    }
    return acts_.back()[0];
  }

  std::vector<double> head_backward(double g_out) {
    const auto& layers = p_.head.layers;
    std::vector<double> g{g_out};
    for (std::size_t l = layers.size(); l-- > 0;) {
      const Tensor2& w = layers[l].weight;
      const Activation act = l + 1 == layers.size() ? p_.head.output : p_.head.hidden;
      for (std::size_t j = 0; j < g.size(); ++j) g[j] *= activation_slope(act, zs_[l][j], acts_[l + 1][j]);
      std::vector<double> prev(w.rows(), 0.0);
      for (std::size_t i = 0; i < w.rows(); ++i) {
        const double* wr = w.data() + i * w.cols();
        double s = 0.0;
        for (std::size_t j = 0; j < w.cols(); ++j) s += wr[j] * g[j];
        prev[i] = s;
      }
      g = std::move(prev);
    }
    return g;
  }

  const ValueNetParams& p_;
  Tensor2 base_;  // f W_f + b, n x hidden
  const Tensor2& label_;
  const Tensor2& label_t_;
  const Tensor2& context_;
  Tensor2 pre_;
  std::vector<double> mass_, g_sum_, shared_, shared_t_, live_g_;
  std::vector<std::size_t> live_k_;
  std::vector<std::vector<double>> acts_, zs_;
};

}  // namespace

LabelTables label_tables(const ValueNetParams& p) {
  LabelTables t{kernels::matmul(p.label_emb, p.w_label), {}, kernels::matmul(p.label_emb, p.w_context)};
  t.label_t = Tensor2(t.label.cols(), t.label.rows());
  for (std::size_t r = 0; r < t.label.rows(); ++r)
    for (std::size_t k = 0; k < t.label.cols(); ++k) t.label_t(k, r) = t.label(r, k);
  return t;
}

Tensor2 refine(const ValueNetParams& p, const LabelTables& tables, const Tensor2& features, const Tensor2& y_init,
               const DvnConfig& cfg, std::vector<Tensor2>* trace) {
  if (cfg.h == 0) return y_init;
  if (y_init.rows() != features.rows() || y_init.cols() != p.label_emb.rows())
    throw ShapeError("refine: label rows " + shape_string(y_init) + " do not match features " + shape_string(features));
  ValueGradient vg(p, tables, features);
  return refine_with([&](const Tensor2& y, Tensor2& grad) { return vg(y, grad); }, y_init, cfg, trace);
}

Tensor2 refine(const ValueNetParams& p, const Tensor2& features, const Tensor2& y_init, const DvnConfig& cfg,
               std::vector<Tensor2>* trace) {
  if (cfg.h == 0) return y_init;
  return refine(p, label_tables(p), features, y_init, cfg, trace);
}

double dvn_loss(double v_pred, double v_star) {
  auto xlogy = [](double x, double y) { return x == 0.0 ? 0.0 : x * std::log(y); };
  return -xlogy(v_star, v_pred) - xlogy(1.0 - v_star, 1.0 - v_pred);
}

double dvn_loss_logit(double logit, double v_star) { return softplus(logit) - v_star * logit; }

namespace {

std::size_t ceil_count(double frac, std::size_t n) {
  return static_cast<std::size_t>(std::ceil(frac * static_cast<double>(n) - 1e-12));
}

std::vector<std::pair<std::size_t, std::size_t>> pair_up(std::vector<std::size_t> pool, std::size_t pairs,
                                                         std::mt19937_64& rng) {
  std::shuffle(pool.begin(), pool.end(), rng);
  std::vector<std::pair<std::size_t, std::size_t>> out;
  for (std::size_t k = 0; k < pairs; ++k) out.emplace_back(pool[2 * k], pool[2 * k + 1]);
  return out;
}

}  // namespace

void apply_swaps(Tensor2& y, std::span<const std::pair<std::size_t, std::size_t>> swaps) {
  for (const auto& [a, b] : swaps) std::swap_ranges(y.row(a).begin(), y.row(a).end(), y.row(b).begin());
}

NoiseResult apply_noise(const Tensor2& y, NoiseMode mode, double s, std::mt19937_64& rng) {
  NoiseResult r{y, {}, {}};
  const std::size_t n = y.rows();
  if (mode == NoiseMode::None || s <= 0.0 || n == 0) return r;
  if (mode == NoiseMode::Random) {
    std::vector<std::size_t> rows(n);
    std::iota(rows.begin(), rows.end(), 0);
    std::shuffle(rows.begin(), rows.end(), rng);
    rows.resize(std::min(n, ceil_count(s, n)));
    std::sort(rows.begin(), rows.end());
    std::exponential_distribution<double> expo(1.0);
    for (auto i : rows) {
      auto row = r.y.row(i);
      double sum = 0.0;
      for (auto& v : row) sum += v = expo(rng);
      for (auto& v : row) v /= sum;
    }
    r.replaced = std::move(rows);
    return r;
  }
  if (n < 2) return r;
  const std::size_t pairs = std::min(n / 2, ceil_count(s / 2.0, n));
  std::vector<std::size_t> pool(n);
  std::iota(pool.begin(), pool.end(), 0);
  if (mode == NoiseMode::SwapLeastConfident) {
    std::vector<double> conf(n);
    for (std::size_t i = 0; i < n; ++i) {
      const auto row = y.row(i);
      conf[i] = *std::max_element(row.begin(), row.end());
    }
    std::stable_sort(pool.begin(), pool.end(), [&](auto a, auto b) { return conf[a] < conf[b]; });
    pool.resize(2 * pairs);
    std::sort(pool.begin(), pool.end());
  }
  r.swaps = pair_up(std::move(pool), pairs, rng);
  apply_swaps(r.y, r.swaps);
  return r;
}

Tensor2 apply_noise(const Tensor2& y, const DvnConfig& cfg, std::mt19937_64& rng) {
  return apply_noise(y, cfg.noise, cfg.swap_fraction, rng).y;
}

}  // namespace dvnee
