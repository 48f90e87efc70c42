#pragma once

#include <string>
#include <utility>
#include <vector>

#include "dvnee/doc_model.hpp"

namespace dvnee {

struct MetricConfig {
  double name = 1.0;
  double nominal = 0.5;
  double pronoun = 0.25;

  double weight(MentionLevel level) const;
  /// Weights must be positive and non-increasing from name to pronoun.
  void validate() const;
};

struct Assignment {
  std::vector<std::pair<std::size_t, std::size_t>> pairs;  // (row, column), sorted by row
  double total = 0.0;
};

/// Maximum-score one-to-one assignment of min(rows, cols) pairs. Among
/// optimal assignments the one whose column sequence (in row order) is
/// lexicographically smallest is returned.
Assignment hungarian(const std::vector<std::vector<double>>& scores);

struct TriggerRef {
  std::size_t token = 0;
  std::string type;
};
using TriggerCluster = std::vector<TriggerRef>;

struct MentionRef {
  Span span;
  MentionLevel level = MentionLevel::Name;
};

/// An argument role filled by an entity, with every co-referent mention.
struct ArgumentCluster {
  std::string role;
  std::vector<MentionRef> mentions;
};

/// Type of the cluster by majority vote; ties go to the earliest trigger.
std::string majority_type(const TriggerCluster& c);

/// Hit * set-F1 over trigger tokens.
double cluster_match_trigger(const TriggerCluster& gold, const TriggerCluster& pred);
/// Hit * (W_BM / W_BG) * (1 - false positives / predicted spans).
double cluster_match_argument(const ArgumentCluster& gold, const ArgumentCluster& pred, const MetricConfig& cfg = {});

struct Prf {
  double p = 0.0, r = 0.0, f1 = 0.0;
};

/// Matched score mass with the two denominators; summed across documents.
struct MatchCounts {
  double matched = 0.0;
  double n_pred = 0.0;
  double n_gold = 0.0;

  MatchCounts& operator+=(const MatchCounts& o);
  /// Empty against empty is (1, 1, 1); a one-sided empty side gives 0.
  Prf prf() const;
};

struct DocTriggerResult {
  MatchCounts counts;
  Assignment assignment;  // rows index gold clusters, columns predicted ones
};

DocTriggerResult doc_trigger(const std::vector<TriggerCluster>& gold, const std::vector<TriggerCluster>& pred);

/// Argument clusters are paired only inside event-cluster pairs of the
/// trigger assignment with a positive match score.
MatchCounts doc_argument(const std::vector<std::vector<ArgumentCluster>>& gold,
                         const std::vector<std::vector<ArgumentCluster>>& pred, const Assignment& triggers,
                         const std::vector<std::vector<double>>& trigger_scores, const MetricConfig& cfg = {});

std::vector<TriggerCluster> trigger_clusters(const Annotations& a);
/// For each event cluster, its argument clusters.
std::vector<std::vector<ArgumentCluster>> argument_clusters(const Annotations& a);

/// MUC link counts.
struct MucCounts {
  double r_num = 0, r_den = 0, p_num = 0, p_den = 0;
  MucCounts& operator+=(const MucCounts& o);
  /// A zero denominator gives 1 on that side.
  Prf prf() const;
};

using MentionKey = std::pair<std::size_t, std::size_t>;
MucCounts muc(const std::vector<std::vector<MentionKey>>& gold, const std::vector<std::vector<MentionKey>>& pred);

/// Exact-match micro counts for the component columns.
struct SetCounts {
  double tp = 0, n_pred = 0, n_gold = 0;
  SetCounts& operator+=(const SetCounts& o);
  Prf prf() const;
};

struct ComponentCounts {
  SetCounts trig_i, trig_c, arg_i, arg_c, entity;
  MucCounts evt_coref, ent_coref;
  ComponentCounts& operator+=(const ComponentCounts& o);
};

ComponentCounts component_counts(const Annotations& gold, const Annotations& pred);

struct ScoreReport {
  Prf doc_trigger, doc_argument;
  Prf trig_i, trig_c, arg_i, arg_c, entity, evt_coref, ent_coref;

  /// Single-line JSON with fixed field order.
  std::string to_json() const;
};

struct DocScores {
  MatchCounts trigger, argument;
  ComponentCounts components;
};

DocScores score_document(const Annotations& gold, const Annotations& pred, const MetricConfig& cfg = {});

/// Documents are paired by doc_id; the two id sets must be equal, else a
/// ValidationError with rule "doc_id_match" is thrown.
ScoreReport score_corpus(const std::vector<Document>& gold, const std::vector<Document>& pred,
                         const MetricConfig& cfg = {});

}  // namespace dvnee
