#include "dvnee/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <set>
#include <stdexcept>
#include <tuple>

#include <json.hpp>

namespace dvnee {

double MetricConfig::weight(MentionLevel level) const {
  switch (level) {
    case MentionLevel::Name: return name;
    case MentionLevel::Nominal: return nominal;
    case MentionLevel::Pronoun: return pronoun;
  }
  return pronoun;
}

void MetricConfig::validate() const {
  if (!(pronoun > 0 && nominal >= pronoun && name >= nominal)) {
    throw std::invalid_argument("metric weights must be positive and non-increasing from name to pronoun");
  }
}

// ---------------------------------------------------------------------------

namespace {

// Minimum-cost perfect matching on a square matrix (potentials method).
// Returns the column for each row.
std::vector<std::size_t> min_cost_assignment(const std::vector<std::vector<double>>& cost) {
  const std::size_t n = cost.size();
  const double inf = std::numeric_limits<double>::infinity();
  std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0), minv(n + 1);
  std::vector<std::size_t> p(n + 1, 0), way(n + 1, 0);
  std::vector<char> used(n + 1);
  for (std::size_t i = 1; i <= n; ++i) {
    p[0] = i;
    std::size_t j0 = 0;
    std::fill(minv.begin(), minv.end(), inf);
    std::fill(used.begin(), used.end(), 0);
    do {
      used[j0] = 1;
      const std::size_t i0 = p[j0];
      double delta = inf;
      std::size_t j1 = 0;
      for (std::size_t j = 1; j <= n; ++j) {
        if (used[j]) continue;
        const double cur = cost[i0 - 1][j - 1] - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (std::size_t j = 0; j <= n; ++j) {
        if (used[j]) {
          u[p[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (p[j0] != 0);
    do {
      const std::size_t j1 = way[j0];
      p[j0] = p[j1];
      j0 = j1;
    } while (j0 != 0);
  }
  std::vector<std::size_t> col_of(n);
  for (std::size_t j = 1; j <= n; ++j) col_of[p[j] - 1] = j - 1;
  return col_of;
}

double best_total(const std::vector<std::vector<double>>& s, const std::vector<std::size_t>& rows,
                  const std::vector<std::size_t>& cols) {
  const std::size_t n = std::max(rows.size(), cols.size());
  if (n == 0) return 0.0;
  std::vector<std::vector<double>> cost(n, std::vector<double>(n, 0.0));
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (std::size_t j = 0; j < cols.size(); ++j) cost[i][j] = -s[rows[i]][cols[j]];
  const auto col_of = min_cost_assignment(cost);
  double total = 0.0;
  for (std::size_t i = 0; i < rows.size(); ++i)
    if (col_of[i] < cols.size()) total += s[rows[i]][cols[col_of[i]]];
  return total;
}

}  // namespace

Assignment hungarian(const std::vector<std::vector<double>>& scores) {
  Assignment out;
  const std::size_t rows = scores.size();
  const std::size_t cols = rows ? scores[0].size() : 0;
  for (const auto& r : scores) {
    if (r.size() != cols) throw std::invalid_argument("hungarian: ragged score matrix");
    for (double v : r)
      if (!std::isfinite(v) || v < 0) throw std::invalid_argument("hungarian: scores must be finite and non-negative");
  }
  if (rows == 0 || cols == 0) return out;

  std::vector<std::size_t> free_rows(rows), free_cols(cols);
  for (std::size_t i = 0; i < rows; ++i) free_rows[i] = i;
  for (std::size_t j = 0; j < cols; ++j) free_cols[j] = j;
  const double opt = best_total(scores, free_rows, free_cols);
  const double tol = 1e-9 * std::max(1.0, opt);

  // Fix rows in order, taking the smallest column that keeps the optimum
  // reachable; a row may stay unassigned only when rows outnumber columns.
  double fixed = 0.0;
  std::size_t unassigned_left = rows > cols ? rows - cols : 0;
  for (std::size_t i = 0; i < rows; ++i) {
    std::vector<std::size_t> rest(free_rows.begin() + 1, free_rows.end());
    bool placed = false;
    for (std::size_t k = 0; k < free_cols.size() && !placed; ++k) {
      const std::size_t j = free_cols[k];
      std::vector<std::size_t> cols_rest = free_cols;
      cols_rest.erase(cols_rest.begin() + static_cast<std::ptrdiff_t>(k));
      if (fixed + scores[i][j] + best_total(scores, rest, cols_rest) >= opt - tol) {
        out.pairs.emplace_back(i, j);
        fixed += scores[i][j];
        free_cols = std::move(cols_rest);
        placed = true;
      }
    }
    if (!placed) {
      if (unassigned_left == 0) throw std::logic_error("hungarian: no feasible column");
      --unassigned_left;
    }
    free_rows.erase(free_rows.begin());
  }
  out.total = fixed;
  return out;
}

// ---------------------------------------------------------------------------

std::string majority_type(const TriggerCluster& c) {
  if (c.empty()) return {};
  std::map<std::string, std::pair<std::size_t, std::size_t>> votes;  // type -> (count, earliest token)
  for (const auto& t : c) {
    auto [it, fresh] = votes.try_emplace(t.type, 0, t.token);
    ++it->second.first;
    it->second.second = std::min(it->second.second, t.token);
  }
  auto best = votes.begin();
  for (auto it = votes.begin(); it != votes.end(); ++it) {
    const auto& [count, first] = it->second;
    if (count > best->second.first || (count == best->second.first && first < best->second.second)) best = it;
  }
  return best->first;
}

double cluster_match_trigger(const TriggerCluster& gold, const TriggerCluster& pred) {
  if (gold.empty() || pred.empty()) return 0.0;
  if (majority_type(pred) != gold.front().type) return 0.0;
  std::set<std::size_t> g, p;
  for (const auto& t : gold) g.insert(t.token);
  for (const auto& t : pred) p.insert(t.token);
  std::size_t common = 0;
  for (auto t : p) common += g.count(t);
  return 2.0 * static_cast<double>(common) / static_cast<double>(g.size() + p.size());
}

double cluster_match_argument(const ArgumentCluster& gold, const ArgumentCluster& pred, const MetricConfig& cfg) {
  if (pred.mentions.empty() || gold.mentions.empty() || gold.role != pred.role) return 0.0;
  // Identical spans count once.
  std::map<Span, MentionLevel> spans;
  for (const auto& m : pred.mentions) {
    auto [it, fresh] = spans.try_emplace(m.span, m.level);
    if (!fresh && cfg.weight(m.level) > cfg.weight(it->second)) it->second = m.level;
  }
  double w_bm = 0.0;
  std::size_t false_pos = 0;
  for (const auto& [span, level] : spans) {
    const bool hit = std::any_of(gold.mentions.begin(), gold.mentions.end(),
                                 [&](const MentionRef& g) { return g.span.overlaps(span); });
    if (hit) {
      w_bm = std::max(w_bm, cfg.weight(level));
    } else {
      ++false_pos;
    }
  }
  if (w_bm == 0.0) return 0.0;
  double w_bg = 0.0;
  for (const auto& g : gold.mentions) w_bg = std::max(w_bg, cfg.weight(g.level));
  return (w_bm / w_bg) * (1.0 - static_cast<double>(false_pos) / static_cast<double>(spans.size()));
}

MatchCounts& MatchCounts::operator+=(const MatchCounts& o) {
  matched += o.matched;
  n_pred += o.n_pred;
  n_gold += o.n_gold;
  return *this;
}

namespace {

Prf make_prf(double p, double r) {
  Prf out{p, r, 0.0};
  if (p + r > 0) out.f1 = 2.0 * p * r / (p + r);
  return out;
}

}  // namespace

Prf MatchCounts::prf() const {
  if (n_pred == 0 && n_gold == 0) return {1.0, 1.0, 1.0};
  return make_prf(n_pred > 0 ? matched / n_pred : 0.0, n_gold > 0 ? matched / n_gold : 0.0);
}

DocTriggerResult doc_trigger(const std::vector<TriggerCluster>& gold, const std::vector<TriggerCluster>& pred) {
  DocTriggerResult r;
  r.counts.n_gold = static_cast<double>(gold.size());
  r.counts.n_pred = static_cast<double>(pred.size());
  std::vector<std::vector<double>> s(gold.size(), std::vector<double>(pred.size()));
  for (std::size_t i = 0; i < gold.size(); ++i)
    for (std::size_t j = 0; j < pred.size(); ++j) s[i][j] = cluster_match_trigger(gold[i], pred[j]);
  r.assignment = hungarian(s);
  r.counts.matched = r.assignment.total;
  return r;
}

MatchCounts doc_argument(const std::vector<std::vector<ArgumentCluster>>& gold,
                         const std::vector<std::vector<ArgumentCluster>>& pred, const Assignment& triggers,
                         const std::vector<std::vector<double>>& trigger_scores, const MetricConfig& cfg) {
  MatchCounts c;
  for (const auto& g : gold) c.n_gold += static_cast<double>(g.size());
  for (const auto& p : pred) c.n_pred += static_cast<double>(p.size());
  for (const auto& [gi, pj] : triggers.pairs) {
    if (trigger_scores[gi][pj] <= 0.0) continue;
    const auto& ga = gold[gi];
    const auto& pa = pred[pj];
    std::vector<std::vector<double>> s(ga.size(), std::vector<double>(pa.size()));
    for (std::size_t i = 0; i < ga.size(); ++i)
      for (std::size_t j = 0; j < pa.size(); ++j) s[i][j] = cluster_match_argument(ga[i], pa[j], cfg);
    c.matched += hungarian(s).total;
  }
  return c;
}

std::vector<TriggerCluster> trigger_clusters(const Annotations& a) {
  std::vector<TriggerCluster> out;
  for (const auto& c : a.event_clusters) {
    TriggerCluster tc;
    for (auto t : c) tc.push_back({a.triggers[t].token, a.triggers[t].type});
    out.push_back(std::move(tc));
  }
  return out;
}

std::vector<std::vector<ArgumentCluster>> argument_clusters(const Annotations& a) {
  std::map<Span, std::size_t> mention_of;
  for (std::size_t m = 0; m < a.entities.size(); ++m) mention_of.emplace(a.entities[m].span, m);
  std::vector<std::size_t> cluster_of(a.entities.size());
  for (std::size_t c = 0; c < a.entity_clusters.size(); ++c)
    for (auto m : a.entity_clusters[c]) cluster_of[m] = c;

  std::vector<std::vector<ArgumentCluster>> out;
  for (const auto& ec : a.event_clusters) {
    std::set<std::size_t> tokens;
    for (auto t : ec) tokens.insert(a.triggers[t].token);
    // (role, entity cluster) -> argument cluster
    std::map<std::pair<std::string, std::size_t>, ArgumentCluster> groups;
    std::size_t orphan = a.entity_clusters.size();
    for (const auto& arg : a.arguments) {
      if (!tokens.count(arg.trigger)) continue;
      const auto it = mention_of.find(arg.span);
      const std::size_t cluster = it == mention_of.end() ? orphan++ : cluster_of[it->second];
      auto [g, fresh] = groups.try_emplace({arg.role, cluster});
      if (!fresh) continue;
      g->second.role = arg.role;
      if (it == mention_of.end()) {
        g->second.mentions.push_back({arg.span, MentionLevel::Pronoun});
      } else {
        for (auto m : a.entity_clusters[cluster]) g->second.mentions.push_back({a.entities[m].span, a.entities[m].level});
      }
    }
    std::vector<ArgumentCluster> list;
    for (auto& [_, g] : groups) list.push_back(std::move(g));
    out.push_back(std::move(list));
  }
  return out;
}

// ---------------------------------------------------------------------------

MucCounts& MucCounts::operator+=(const MucCounts& o) {
  r_num += o.r_num;
  r_den += o.r_den;
  p_num += o.p_num;
  p_den += o.p_den;
  return *this;
}

Prf MucCounts::prf() const { return make_prf(p_den > 0 ? p_num / p_den : 1.0, r_den > 0 ? r_num / r_den : 1.0); }

namespace {

// Sum over `key` clusters of |K| - |partition of K by `response`|, and the
// matching sum of |K| - 1.
std::pair<double, double> muc_side(const std::vector<std::vector<MentionKey>>& key,
                                   const std::vector<std::vector<MentionKey>>& response) {
  std::map<MentionKey, std::size_t> owner;
  for (std::size_t c = 0; c < response.size(); ++c)
    for (const auto& m : response[c]) owner[m] = c;
  double num = 0, den = 0;
  for (const auto& k : key) {
    if (k.empty()) continue;
    std::set<std::size_t> parts;
    std::size_t loose = 0;
    for (const auto& m : k) {
      const auto it = owner.find(m);
      if (it == owner.end()) {
        ++loose;
      } else {
        parts.insert(it->second);
      }
    }
    num += static_cast<double>(k.size() - parts.size() - loose);
    den += static_cast<double>(k.size() - 1);
  }
  return {num, den};
}

}  // namespace

MucCounts muc(const std::vector<std::vector<MentionKey>>& gold, const std::vector<std::vector<MentionKey>>& pred) {
  MucCounts c;
  std::tie(c.r_num, c.r_den) = muc_side(gold, pred);
  std::tie(c.p_num, c.p_den) = muc_side(pred, gold);
  return c;
}

SetCounts& SetCounts::operator+=(const SetCounts& o) {
  tp += o.tp;
  n_pred += o.n_pred;
  n_gold += o.n_gold;
  return *this;
}

Prf SetCounts::prf() const {
  if (n_pred == 0 && n_gold == 0) return {1.0, 1.0, 1.0};
  return make_prf(n_pred > 0 ? tp / n_pred : 0.0, n_gold > 0 ? tp / n_gold : 0.0);
}

ComponentCounts& ComponentCounts::operator+=(const ComponentCounts& o) {
  trig_i += o.trig_i;
  trig_c += o.trig_c;
  arg_i += o.arg_i;
  arg_c += o.arg_c;
  entity += o.entity;
  evt_coref += o.evt_coref;
  ent_coref += o.ent_coref;
  return *this;
}

namespace {

template <class T>
SetCounts set_counts(const std::set<T>& gold, const std::set<T>& pred) {
  SetCounts c;
  c.n_gold = static_cast<double>(gold.size());
  c.n_pred = static_cast<double>(pred.size());
  for (const auto& x : pred) c.tp += static_cast<double>(gold.count(x));
  return c;
}

struct Keys {
  std::set<std::size_t> trig_i;
  std::set<std::pair<std::size_t, std::string>> trig_c;
  std::set<std::tuple<std::size_t, std::size_t, std::string>> arg_i;
  std::set<std::tuple<std::size_t, std::size_t, std::string, std::string>> arg_c;
  std::set<std::tuple<std::size_t, std::size_t, std::string>> entity;
  std::vector<std::vector<MentionKey>> evt, ent;
};

Keys keys_of(const Annotations& a) {
  Keys k;
  std::map<std::size_t, std::string> type_at;
  for (const auto& t : a.triggers) {
    k.trig_i.insert(t.token);
    k.trig_c.insert({t.token, t.type});
    type_at[t.token] = t.type;
  }
  for (const auto& arg : a.arguments) {
    const auto it = type_at.find(arg.trigger);
    const std::string type = it == type_at.end() ? std::string() : it->second;
    k.arg_i.insert({arg.span.start, arg.span.end, type});
    k.arg_c.insert({arg.span.start, arg.span.end, type, arg.role});
  }
  for (const auto& e : a.entities) k.entity.insert({e.span.start, e.span.end, e.type});
  for (const auto& c : a.event_clusters) {
    std::vector<MentionKey> keys;
    for (auto t : c) keys.emplace_back(a.triggers[t].token, a.triggers[t].token);
    k.evt.push_back(std::move(keys));
  }
  for (const auto& c : a.entity_clusters) {
    std::vector<MentionKey> keys;
    for (auto m : c) keys.emplace_back(a.entities[m].span.start, a.entities[m].span.end);
    k.ent.push_back(std::move(keys));
  }
  return k;
}

}  // namespace

ComponentCounts component_counts(const Annotations& gold, const Annotations& pred) {
  const auto g = keys_of(gold), p = keys_of(pred);
  ComponentCounts c;
  c.trig_i = set_counts(g.trig_i, p.trig_i);
  c.trig_c = set_counts(g.trig_c, p.trig_c);
  c.arg_i = set_counts(g.arg_i, p.arg_i);
  c.arg_c = set_counts(g.arg_c, p.arg_c);
  c.entity = set_counts(g.entity, p.entity);
  c.evt_coref = muc(g.evt, p.evt);
  c.ent_coref = muc(g.ent, p.ent);
  return c;
}

DocScores score_document(const Annotations& gold, const Annotations& pred, const MetricConfig& cfg) {
  DocScores d;
  const auto gt = trigger_clusters(gold), pt = trigger_clusters(pred);
  const auto trig = doc_trigger(gt, pt);
  d.trigger = trig.counts;
  std::vector<std::vector<double>> s(gt.size(), std::vector<double>(pt.size()));
  for (std::size_t i = 0; i < gt.size(); ++i)
    for (std::size_t j = 0; j < pt.size(); ++j) s[i][j] = cluster_match_trigger(gt[i], pt[j]);
  d.argument = doc_argument(argument_clusters(gold), argument_clusters(pred), trig.assignment, s, cfg);
  d.components = component_counts(gold, pred);
  return d;
}

std::string ScoreReport::to_json() const {
  nlohmann::ordered_json j;
  auto put = [](const Prf& x) { return nlohmann::ordered_json{{"p", x.p}, {"r", x.r}, {"f1", x.f1}}; };
  j["doc_trigger"] = put(doc_trigger);
  j["doc_argument"] = put(doc_argument);
  j["components"] = {{"Trig-I", put(trig_i)},   {"Trig-C", put(trig_c)},       {"Arg-I", put(arg_i)},
                     {"Arg-C", put(arg_c)},     {"Entity", put(entity)},       {"Evt-Coref", put(evt_coref)},
                     {"Ent-Coref", put(ent_coref)}};
  return j.dump();
}

ScoreReport score_corpus(const std::vector<Document>& gold, const std::vector<Document>& pred,
                         const MetricConfig& cfg) {
  std::map<std::string, const Document*> by_id;
  for (const auto& d : pred) {
    if (!by_id.emplace(d.doc_id, &d).second) throw ValidationError("doc_id_match", "duplicate predicted doc_id " + d.doc_id);
  }
  if (by_id.size() != gold.size()) throw ValidationError("doc_id_match", "gold and predicted document sets differ");
  MatchCounts trig, arg;
  ComponentCounts comp;
  const Annotations empty;
  for (const auto& g : gold) {
    const auto it = by_id.find(g.doc_id);
    if (it == by_id.end()) throw ValidationError("doc_id_match", "no prediction for " + g.doc_id);
    const auto& ga = g.gold ? *g.gold : empty;
    const auto& pa = it->second->gold ? *it->second->gold : empty;
    const auto d = score_document(ga, pa, cfg);
    trig += d.trigger;
    arg += d.argument;
    comp += d.components;
  }
  ScoreReport r;
  r.doc_trigger = trig.prf();
  r.doc_argument = arg.prf();
  r.trig_i = comp.trig_i.prf();
  r.trig_c = comp.trig_c.prf();
  r.arg_i = comp.arg_i.prf();
  r.arg_c = comp.arg_c.prf();
  r.entity = comp.entity.prf();
  r.evt_coref = comp.evt_coref.prf();
  r.ent_coref = comp.ent_coref.prf();
  return r;
}

}  // namespace dvnee
