#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "dvnee/doc_model.hpp"

namespace dvnee::synth {

/// A pair of event types that share an ambiguous trigger lexicon. Which of
/// the two an ambiguous trigger takes is decided by the type of a companion
/// trigger in the same sentence: `companions[b]` selects `targets[b]`.
struct DependencyRule {
  std::string targets[2];
  std::string companions[2];
};

struct Schema {
  std::vector<std::string> event_types;  // without NULL
  std::vector<std::string> entity_types;
  std::vector<std::string> roles;
  /// event type -> (entity type -> role)
  std::map<std::string, std::map<std::string, std::string>> role_table;
  std::vector<DependencyRule> dependencies;

  TypeInventory inventory(std::size_t k_max = 12) const;
};

/// Default event schema; two dependency rules (Die/Execute and
/// Transport/Arrest-Jail) modelled on sentencing and attack narratives.
Schema default_schema();

struct IntRange {
  int lo = 0;
  int hi = 0;
};

struct MentionMix {
  double name = 0.2;
  double nominal = 0.4;
  double pronoun = 0.4;
};

struct GenConfig {
  int n_docs = 570;
  IntRange sentences_per_doc{3, 8};
  IntRange tokens_per_sentence{8, 20};
  double event_rate = 0.6;        // P(sentence carries an event unit)
  double dependency_rate = 0.3;   // P(event unit is a companion/ambiguous pair)
  double event_coref_rate = 0.3;  // P(standalone event is mentioned again later)
  IntRange chain_length{1, 4};    // mentions per entity
  MentionMix later_mentions;      // level mix after the first (name) mention
  double extra_mention_rate = 0.5;
  int filler_vocab = 400;
  int trigger_lexicon = 4;    // unambiguous trigger words per event type
  int ambiguous_lexicon = 3;  // shared words per dependency rule
  int name_pool = 60;         // name tokens per entity type
  int nominal_lexicon = 4;    // nominal head words per entity type
  std::uint64_t seed = 0;
  Schema schema = default_schema();

  /// Throws std::invalid_argument naming the offending field.
  void validate() const;
};

/// Surface vocabulary derived from a config.
struct Lexicon {
  std::map<std::string, std::vector<std::string>> triggers;  // event type -> words
  std::vector<std::vector<std::string>> ambiguous;            // per dependency rule
  std::vector<std::string> filler;
  std::map<std::string, std::vector<std::string>> names;     // entity type -> name tokens
  std::map<std::string, std::vector<std::string>> nominals;  // entity type -> nominal heads
  std::map<std::string, std::vector<std::string>> pronouns;  // entity type -> pronouns

  /// Index of the dependency rule whose ambiguous lexicon holds `word`, or -1.
  int ambiguous_rule(const std::string& word) const;
};

Lexicon build_lexicon(const GenConfig& cfg);

/// Deterministic per seed; every document carries full gold annotations.
std::vector<Document> generate(const GenConfig& cfg);

struct Splits {
  std::vector<Document> train, dev, test;
};

/// dev and test receive round(ratio * n) documents each, train the rest;
/// assignment is a seeded shuffle, order within a split follows the input.
Splits split(const std::vector<Document>& corpus, const double (&ratios)[3], std::uint64_t seed);

}  // namespace dvnee::synth
