#pragma once

#include <cstddef>
#include <cstdint>
#include <compare>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace dvnee {

/// Malformed record: bad JSON, missing field, wrong field type.
class ParseError : public std::runtime_error {
 public:
  ParseError(std::size_t line, const std::string& field, const std::string& what);
  std::size_t line() const { return line_; }
  const std::string& field() const { return field_; }

 private:
  std::size_t line_;
  std::string field_;
};

/// Well-formed record that breaks a document invariant. `rule()` names it.
class ValidationError : public std::runtime_error {
 public:
  ValidationError(const std::string& rule, const std::string& what);
  const std::string& rule() const { return rule_; }

 private:
  std::string rule_;
};

enum class MentionLevel : std::uint8_t { Name = 0, Nominal = 1, Pronoun = 2 };

std::string_view to_string(MentionLevel level);
MentionLevel mention_level_from_string(std::string_view s);

/// Half-open token range [start, end).
struct SentenceBounds {
  std::size_t start = 0;
  std::size_t end = 0;

  std::size_t size() const { return end - start; }
  friend bool operator==(const SentenceBounds&, const SentenceBounds&) = default;
};

/// Inclusive token span confined to one sentence.
struct Span {
  std::size_t start = 0;
  std::size_t end = 0;
  std::size_t sentence = 0;

  std::size_t width() const { return end - start + 1; }
  bool overlaps(const Span& o) const { return start <= o.end && o.start <= end; }
  friend bool operator==(const Span& a, const Span& b) { return a.start == b.start && a.end == b.end; }
  friend auto operator<=>(const Span& a, const Span& b) {
    if (auto c = a.start <=> b.start; c != 0) return c;
    return a.end <=> b.end;
  }
};

struct Trigger {
  std::size_t token = 0;
  std::string type;
  friend bool operator==(const Trigger&, const Trigger&) = default;
};

struct Argument {
  std::size_t trigger = 0;  // token index of the trigger
  Span span;
  std::string role;
  friend bool operator==(const Argument& a, const Argument& b) {
    return a.trigger == b.trigger && a.span == b.span && a.role == b.role;
  }
};

struct EntityMention {
  Span span;
  std::string type;
  MentionLevel level = MentionLevel::Name;
  friend bool operator==(const EntityMention& a, const EntityMention& b) {
    return a.span == b.span && a.type == b.type && a.level == b.level;
  }
};

/// Partition of a mention pool; each cluster lists indices into the pool.
using ClusterSet = std::vector<std::vector<std::size_t>>;

struct Annotations {
  std::vector<Trigger> triggers;
  std::vector<Argument> arguments;
  std::vector<EntityMention> entities;
  ClusterSet entity_clusters;  // indices into `entities`
  ClusterSet event_clusters;   // indices into `triggers`

  friend bool operator==(const Annotations&, const Annotations&) = default;
};

struct Document {
  std::string doc_id;
  std::vector<std::string> tokens;
  std::vector<SentenceBounds> sentences;
  std::optional<Annotations> gold;

  std::size_t token_count() const { return tokens.size(); }
  /// Sentence index holding `token`; throws std::out_of_range past the end.
  std::size_t sentence_of(std::size_t token) const;
};

struct TypeInventory {
  std::vector<std::string> event_types;  // index 0 is the NULL type
  std::vector<std::string> entity_types;
  std::vector<std::string> argument_roles;
  std::size_t k_max = 12;

  static constexpr std::string_view kNullType = "NULL";

  std::size_t event_index(std::string_view name) const;
  std::size_t entity_index(std::string_view name) const;
  std::size_t role_index(std::string_view name) const;
  void validate() const;
};

/// Parses one line-delimited record. `line_no` only feeds diagnostics.
Document parse_document(std::string_view line, std::size_t line_no = 1);
/// Canonical single-line serialization (no trailing newline).
std::string serialize_document(const Document& doc);

/// Checks every Document/Annotations invariant. Sorts cluster members and
/// cluster order, and adds missing mentions as singletons.
void normalize_and_validate(Document& doc);
/// Same checks without normalization; throws ValidationError.
void validate(const Document& doc);
/// Checks span widths and label names against an inventory.
void validate_against(const Document& doc, const TypeInventory& types);

/// All in-sentence spans of width 1..k_max, sorted by (start, end).
std::vector<Span> enumerate_spans(const Document& doc, std::size_t k_max);
std::vector<Span> enumerate_spans(std::span<const SentenceBounds> sentences, std::size_t k_max);

/// `links[m]` is the antecedent of mention m, or nullopt. Links must point
/// strictly backwards. Clusters come out sorted by first member.
ClusterSet clusters_from_antecedents(const std::vector<std::optional<std::size_t>>& links);

/// Reads a whole line-delimited corpus; blank lines are skipped.
std::vector<Document> read_corpus(const std::string& path);
void write_corpus(const std::string& path, const std::vector<Document>& docs);

}  // namespace dvnee
