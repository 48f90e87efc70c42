#pragma once

#include <cstdint>
#include <limits>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "dvnee/doc_model.hpp"
#include "dvnee/features.hpp"
#include "dvnee/mlp.hpp"

namespace dvnee {

struct LocalDims {
  std::size_t hidden = 128;
  std::size_t d_width = 16;
  std::size_t max_antecedents = 50;
};

inline constexpr std::size_t kLevels = 3;

/// Trainable part of the base extractor. Entity logits are laid out as
/// [null, entity types..., name, nominal, pronoun]: a type softmax over the
/// first 1 + |types| columns and a level softmax over the last three.
struct LocalModelParams {
  Tensor2 width;                // kWidthBuckets x d_width
  MlpParams trig;               // d_tok -> hidden -> |event types|
  FactoredMlpParams ent;        // [e_h, e_t, c] -> entity logits
  FactoredMlpParams arg;        // [e_trig, y_trig, e_h, e_t, c] -> 1 + |roles|
  FactoredMlpParams evt_coref;  // [e_i, y_i, e_j, y_j, dist] -> 1
  FactoredMlpParams ent_coref;  // [e_h, e_t, c]_i ++ [e_h, e_t, c]_j ++ dist -> 1

  static LocalModelParams create(const TypeInventory& types, std::size_t d_tok, const LocalDims& dims,
                                 std::mt19937_64& rng);
  LocalModelParams zeros_like() const;
  void collect(const std::string& prefix, NamedTensors& out);

  std::size_t event_types() const { return trig.output_dim(); }
  std::size_t entity_types() const { return ent.output_dim() - 1 - kLevels; }
  std::size_t roles() const { return arg.output_dim() - 1; }
};

enum class PairTask : std::uint8_t { Argument, EventCoref, EntityCoref };

/// Row indices for a batch of pairs. `a_*` describe the first member (the
/// trigger for Argument, the later mention for the coreference tasks),
/// `b_*` the second. Trigger members use a_head / b_head as token indices.
struct PairBatch {
  std::vector<std::uint32_t> a_head, a_tail, a_width;
  std::vector<std::uint32_t> b_head, b_tail, b_width;
  std::vector<std::uint32_t> dist;
  std::size_t size() const { return b_head.size(); }
};

/// Tables the pair scorers gather from.
struct PairTables {
  const Tensor2* features = nullptr;      // n x d_tok
  const Tensor2* trigger_dist = nullptr;  // n x |event types|, treated as constant
};

/// Softmax over event types for every feature row.
Tensor2 classify_triggers(const LocalModelParams& p, const Tensor2& features);

/// Entity logits for a list of spans (token indices into `features`).
FactoredMlpCache score_spans(const LocalModelParams& p, const Tensor2& features, std::span<const Span> spans);

/// Pair logits: 1 + |roles| columns for Argument, one column otherwise.
FactoredMlpCache score_pairs(const LocalModelParams& p, PairTask task, const PairTables& tables,
                             const PairBatch& batch);

/// scores[m][k] is the score of mention k < m as antecedent of m (use
/// -infinity for pruned candidates). Picks argmax over {null} and earlier
/// mentions; ties go to null, then to the nearest antecedent.
std::vector<std::optional<std::size_t>> predict_antecedents(const std::vector<std::vector<double>>& scores,
                                                            double null_score = 0.0);

// ---------------------------------------------------------------------------
// Training examples and losses.

/// Antecedent-ranking problem over the mentions of one chunk. Pairs for
/// mention m occupy [offsets[m], offsets[m + 1]).
struct CorefProblem {
  PairBatch pairs;
  std::vector<std::size_t> offsets{0};
  std::vector<std::uint8_t> gold;  // per pair: same cluster
  std::size_t mentions() const { return offsets.size() - 1; }
};

/// One chunk with everything the losses need. Indices are chunk-relative.
struct ChunkExample {
  std::vector<std::string> tokens;
  std::vector<SentenceBounds> sentences;
  Tensor2 features;                     // fixed features (Hash provider)
  std::vector<std::uint32_t> feature_rows;  // lookup rows (Lookup provider)
  std::vector<Span> spans;              // candidate spans
  std::vector<std::uint32_t> trigger_label;  // per token, event index
  std::vector<std::uint32_t> span_label;     // per span, 0 = null, else 1 + entity index
  std::vector<std::int32_t> span_level;      // per span, -1 or MentionLevel
  PairBatch arg_pairs;
  std::vector<std::uint32_t> arg_label;  // 0 = null, else 1 + role index
  CorefProblem evt;
  CorefProblem ent;
};

ChunkExample make_example(const Document& doc, const Chunk& chunk, const FeatureProvider& provider,
                          const TypeInventory& types, std::size_t max_antecedents);

/// Feature rows for an example under the current provider state.
Tensor2 example_features(const ChunkExample& ex, const FeatureProvider& provider);

struct LocalLoss {
  double trigger = 0, entity = 0, argument = 0, event_coref = 0, entity_coref = 0;
  double total() const { return trigger + entity + argument + event_coref + entity_coref; }
};

struct LocalForward {
  LocalLoss loss;
  Tensor2 trigger_dist;  // softmax rows, the input handed to the value network
};

/// Sum of the five task losses, each a mean over its items. When `grads` is
/// non-null, parameter gradients are accumulated into it; when
/// `grad_features` is non-null it receives d loss / d features. The pair
/// scorers read the trigger distribution as a constant: the model's own
/// softmax rows, or `pair_dist` when given.
LocalForward local_loss(const LocalModelParams& p, const ChunkExample& ex, const Tensor2& features,
                        LocalModelParams* grads = nullptr, Tensor2* grad_features = nullptr,
                        const Tensor2* pair_dist = nullptr);

/// Mean softmax cross-entropy over columns [col_begin, col_end); adds
/// (softmax - onehot) / rows into grad.
double softmax_cross_entropy(const Tensor2& logits, std::span<const std::uint32_t> labels, std::size_t col_begin,
                             std::size_t col_end, Tensor2* grad, std::span<const std::uint32_t> rows = {});

/// Mean over mentions of -log sum of softmax mass on gold antecedents, with a
/// fixed null score of 0 that is the gold choice when no antecedent is.
double marginal_log_likelihood(std::span<const double> scores, const CorefProblem& prob, std::span<double> grad);

}  // namespace dvnee
