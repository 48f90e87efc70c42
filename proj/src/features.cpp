#include "dvnee/features.hpp"

#include <cmath>
#include <stdexcept>

namespace dvnee {

namespace {

std::uint64_t splitmix(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::uint64_t hash_string(std::string_view s, std::uint64_t seed) {
  std::uint64_t h = 0xcbf29ce484222325ULL ^ seed;  // FNV-1a
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return splitmix(h);
}

// Unit-variance uniform values keyed on (token, slot, coordinate).
void hashed_vector(std::string_view token, std::uint64_t seed, std::uint64_t slot, std::span<double> out) {
  const std::uint64_t base = hash_string(token, seed ^ (slot * 0x632be59bd9b4e019ULL));
  const double scale = std::sqrt(3.0);
  for (std::size_t j = 0; j < out.size(); ++j) {
    const std::uint64_t r = splitmix(base + j);
    const double u = static_cast<double>(r >> 11) * 0x1.0p-53;  // [0, 1)
    out[j] = scale * (2.0 * u - 1.0);
  }
}

const std::string kBos = "<s>";
const std::string kEos = "</s>";

}  // namespace

std::string_view to_string(FeatureKind k) { return k == FeatureKind::Hash ? "hash" : "lookup"; }

FeatureKind feature_kind_from_string(std::string_view s) {
  if (s == "hash") return FeatureKind::Hash;
  if (s == "lookup") return FeatureKind::Lookup;
  throw std::invalid_argument("unknown feature kind '" + std::string(s) + "'");
}

FeatureProvider::FeatureProvider(FeatureConfig cfg) : cfg_(cfg) {
  if (cfg_.d_tok < 4) throw std::invalid_argument("features.d_tok must be >= 4");
  if (cfg_.kind == FeatureKind::Lookup) {
    if (cfg_.buckets == 0) throw std::invalid_argument("features.buckets must be positive");
    table_ = Tensor2(cfg_.buckets, cfg_.d_tok);
    std::mt19937_64 rng(cfg_.seed);
    normal_fill(table_, rng, 1.0);
  }
}

std::vector<std::uint32_t> FeatureProvider::rows_for(std::span<const std::string> tokens) const {
  std::vector<std::uint32_t> rows;
  if (!trainable()) return rows;
  rows.reserve(tokens.size());
  for (const auto& t : tokens) rows.push_back(static_cast<std::uint32_t>(hash_string(t, cfg_.seed) % cfg_.buckets));
  return rows;
}

Tensor2 FeatureProvider::embed(std::span<const std::string> tokens) const {
  const std::size_t n = tokens.size();
  const std::size_t d = cfg_.d_tok;
  Tensor2 out(n, d);
  if (trainable()) {
    const auto rows = rows_for(tokens);
    for (std::size_t i = 0; i < n; ++i) {
      auto src = table_.row(rows[i]);
      std::copy(src.begin(), src.end(), out.row(i).begin());
    }
    return out;
  }
  const std::size_t center = d / 2;
  const std::size_t side = (d - center) / 2;
  for (std::size_t i = 0; i < n; ++i) {
    auto row = out.row(i);
    hashed_vector(tokens[i], cfg_.seed, 0, row.subspan(0, center));
    hashed_vector(i > 0 ? tokens[i - 1] : kBos, cfg_.seed, 1, row.subspan(center, side));
    hashed_vector(i + 1 < n ? tokens[i + 1] : kEos, cfg_.seed, 2, row.subspan(center + side));
  }
  return out;
}

void FeatureProvider::collect(const std::string& prefix, NamedTensors& out) {
  if (trainable()) out.emplace_back(prefix + ".table", &table_);
}

std::size_t width_bucket(std::size_t width) {
  if (width <= 4) return width == 0 ? 0 : width - 1;
  return width <= 7 ? 4 : 5;
}

std::size_t distance_bucket(std::size_t distance) {
  if (distance <= 4) return distance;
  return distance <= 7 ? 5 : 6;
}

std::vector<Chunk> chunk_document(const Document& doc, std::size_t max_tokens) {
  std::vector<Chunk> chunks;
  for (std::size_t s = 0; s < doc.sentences.size(); ++s) {
    const auto& sent = doc.sentences[s];
    if (sent.size() > max_tokens) {
      throw std::invalid_argument("sentence " + std::to_string(s) + " of " + doc.doc_id + " has " +
                                  std::to_string(sent.size()) + " tokens, more than max_tokens=" +
                                  std::to_string(max_tokens));
    }
    if (chunks.empty() || chunks.back().size() + sent.size() > max_tokens) {
      chunks.push_back({s, s + 1, sent.start, sent.end});
    } else {
      chunks.back().last_sentence = s + 1;
      chunks.back().token_end = sent.end;
    }
  }
  return chunks;
}

}  // namespace dvnee
