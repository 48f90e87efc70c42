#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "dvnee/doc_model.hpp"
#include "dvnee/mlp.hpp"

namespace dvnee {

enum class FeatureKind : std::uint8_t { Hash, Lookup };

struct FeatureConfig {
  FeatureKind kind = FeatureKind::Hash;
  std::uint64_t seed = 17;
  std::size_t d_tok = 64;
  std::size_t buckets = 4096;  // lookup table rows
};

std::string_view to_string(FeatureKind k);
FeatureKind feature_kind_from_string(std::string_view s);

/// Tokens -> one embedding row per token.
///
/// Hash: the first half of a row is a pseudo-random vector keyed on the
/// token string, the next two quarters the same for the left and right
/// neighbours. Nothing is trained.
/// Lookup: a trainable table indexed by a hash of the token alone.
class FeatureProvider {
 public:
  explicit FeatureProvider(FeatureConfig cfg = {});

  const FeatureConfig& config() const { return cfg_; }
  std::size_t dim() const { return cfg_.d_tok; }
  bool trainable() const { return cfg_.kind == FeatureKind::Lookup; }

  Tensor2 embed(std::span<const std::string> tokens) const;
  /// Lookup rows used by `embed`, one per token; empty for Hash.
  std::vector<std::uint32_t> rows_for(std::span<const std::string> tokens) const;

  /// Trainable table (Lookup only).
  Tensor2& table() { return table_; }
  const Tensor2& table() const { return table_; }
  void collect(const std::string& prefix, NamedTensors& out);

 private:
  FeatureConfig cfg_;
  Tensor2 table_;
};

inline constexpr std::size_t kWidthBuckets = 6;
inline constexpr std::size_t kDistanceBuckets = 7;

/// Span width -> {1, 2, 3, 4, 5-7, 8-12}; wider spans share the last bucket.
std::size_t width_bucket(std::size_t width);
/// Sentence distance -> {0, 1, 2, 3, 4, 5-7, 8+}.
std::size_t distance_bucket(std::size_t distance);

/// A run of whole consecutive sentences.
struct Chunk {
  std::size_t first_sentence = 0;
  std::size_t last_sentence = 0;  // exclusive
  std::size_t token_begin = 0;
  std::size_t token_end = 0;  // exclusive
  std::size_t size() const { return token_end - token_begin; }
};

/// Greedy packing of whole sentences into chunks of at most `max_tokens`.
/// Throws std::invalid_argument when a sentence is longer than that.
std::vector<Chunk> chunk_document(const Document& doc, std::size_t max_tokens);

}  // namespace dvnee
