#pragma once

#include <cstdint>
#include <functional>
#include <random>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "dvnee/mlp.hpp"

namespace dvnee {

enum class NoiseMode : std::uint8_t { None, Random, Swap, SwapLeastConfident };

std::string_view to_string(NoiseMode m);
NoiseMode noise_mode_from_string(std::string_view s);

struct DvnConfig {
  double alpha = 0.1;  // inference step size
  std::size_t h = 20;  // refinement iterations
  NoiseMode noise = NoiseMode::None;
  double swap_fraction = 0.2;
  double clamp_lo = 1e-6;
  double clamp_hi = 1.0 - 1e-6;
  std::size_t d_lab = 16;
  std::size_t hidden = 128;

  /// Throws std::invalid_argument naming the offending field.
  void validate() const;
};

/// v(x, y) = logistic(rho(mean_i relu(f_i W_f + (y_i L) W_y + (c L) W_c + b)))
/// where c sums the non-NULL label mass of the whole chunk. Each token's
/// features and label row are fused with that context before pooling, so a
/// unit can respond to a label on one kind of token given the other events
/// present.
struct ValueNetParams {
  Tensor2 label_emb;  // |event types| x d_lab
  Tensor2 w_feat;     // d_tok x hidden
  Tensor2 w_label;    // d_lab x hidden
  Tensor2 w_context;  // d_lab x hidden
  Tensor2 bias;       // 1 x hidden
  MlpParams head;     // hidden -> hidden -> 1, identity output (a logit)

  static ValueNetParams create(std::size_t n_types, std::size_t d_tok, const DvnConfig& cfg, std::mt19937_64& rng);
  ValueNetParams zeros_like() const;
  void collect(const std::string& prefix, NamedTensors& out);
};

struct ValueCache {
  const ValueNetParams* params = nullptr;
  const Tensor2* features = nullptr;
  const Tensor2* y = nullptr;
  Tensor2 label_rows;  // y * label_emb
  Tensor2 context;     // 1 x d_lab, non-NULL rows of label_emb weighted by total mass
  Tensor2 pre;         // pre-activation, n x hidden
  MlpCache head;
  double logit = 0.0;
  double value = 0.5;
};

/// f W_f for a chunk; it does not depend on y, so refinement computes it once.
Tensor2 project_features(const ValueNetParams& p, const Tensor2& features);

/// `projected`, when given, must equal project_features(p, features).
ValueCache value_forward(const ValueNetParams& p, const Tensor2& features, const Tensor2& y,
                         const Tensor2* projected = nullptr);

/// Back-propagates d loss / d logit. Parameter gradients are accumulated into
/// `grads` and d loss / d y is written to `grad_y`; either may be null.
void value_backward(const ValueNetParams& p, const ValueCache& cache, double grad_logit, ValueNetParams* grads,
                    Tensor2* grad_y);

double value(const ValueNetParams& p, const Tensor2& features, const Tensor2& y);

/// 2 * sum(min) / (sum(min) + sum(max)) over every non-NULL entry; 1 when
/// both sides carry no non-NULL mass.
double oracle_relaxed_f1(const Tensor2& y_hat, const Tensor2& y_gold);
double oracle_relaxed_f1(const Tensor2& y_hat, std::span<const std::uint32_t> gold_labels);

/// Returns the value and writes d value / d y into `grad`.
using ValueGradFn = std::function<double(const Tensor2& y, Tensor2& grad)>;

/// h steps of y <- clamp(y + alpha * grad). `trace`, when given, receives
/// every iterate after the first step. Throws NumericError on a non-finite
/// gradient.
Tensor2 refine_with(const ValueGradFn& f, const Tensor2& y_init, const DvnConfig& cfg,
                    std::vector<Tensor2>* trace = nullptr);
Tensor2 refine(const ValueNetParams& p, const Tensor2& features, const Tensor2& y_init, const DvnConfig& cfg,
               std::vector<Tensor2>* trace = nullptr);

/// L W_y and L W_c depend only on the weights; build them once when refining
/// many chunks with the same network.
struct LabelTables {
  Tensor2 label;    // L W_y, types x hidden
  Tensor2 label_t;  // its transpose
  Tensor2 context;  // L W_c, types x hidden
};
LabelTables label_tables(const ValueNetParams& p);
Tensor2 refine(const ValueNetParams& p, const LabelTables& tables, const Tensor2& features, const Tensor2& y_init,
               const DvnConfig& cfg, std::vector<Tensor2>* trace = nullptr);

/// Binary cross-entropy of a predicted value against the oracle score.
double dvn_loss(double v_pred, double v_star);
/// The same loss written on the logit; stable for saturated values.
double dvn_loss_logit(double logit, double v_star);

struct NoiseResult {
  Tensor2 y;
  std::vector<std::pair<std::size_t, std::size_t>> swaps;  // exchanged row pairs
  std::vector<std::size_t> replaced;                       // rows redrawn by Random
};

NoiseResult apply_noise(const Tensor2& y, NoiseMode mode, double s, std::mt19937_64& rng);
Tensor2 apply_noise(const Tensor2& y, const DvnConfig& cfg, std::mt19937_64& rng);
/// Exchanges each listed pair of rows in place.
void apply_swaps(Tensor2& y, std::span<const std::pair<std::size_t, std::size_t>> swaps);

}  // namespace dvnee
