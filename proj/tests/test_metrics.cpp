#include <doctest.h>

#include <algorithm>
#include <numeric>
#include <random>
#include <set>

#include "dvnee/metrics.hpp"
#include "dvnee/synth.hpp"

using namespace dvnee;

namespace {

double brute_force(const std::vector<std::vector<double>>& s) {
  const std::size_t r = s.size(), c = s[0].size();
  const std::size_t n = std::max(r, c);
  std::vector<std::size_t> perm(n);
  std::iota(perm.begin(), perm.end(), 0);
  double best = 0.0;
  do {
    double t = 0;
    for (std::size_t i = 0; i < r; ++i)
      if (perm[i] < c) t += s[i][perm[i]];
    best = std::max(best, t);
  } while (std::next_permutation(perm.begin(), perm.end()));
  return best;
}

Span sp(std::size_t a, std::size_t b) { return Span{a, b, 0}; }

}  // namespace

TEST_CASE("hungarian small cases") {
  const auto one = hungarian({{0.7}});
  REQUIRE(one.pairs.size() == 1);
  CHECK(one.pairs[0] == std::pair<std::size_t, std::size_t>{0, 0});
  CHECK(one.total == 0.7);
  const auto anti = hungarian({{1, 2}, {2, 1}});
  CHECK(anti.total == 4.0);
  CHECK(anti.pairs == std::vector<std::pair<std::size_t, std::size_t>>{{0, 1}, {1, 0}});
  // All ties: the identity is the lexicographically smallest optimum.
  const auto ties = hungarian({{1, 1}, {1, 1}});
  CHECK(ties.pairs == std::vector<std::pair<std::size_t, std::size_t>>{{0, 0}, {1, 1}});
  CHECK(hungarian({{0, 3, 0}}).pairs == std::vector<std::pair<std::size_t, std::size_t>>{{0, 1}});
  CHECK(hungarian({{1}, {5}, {2}}).pairs == std::vector<std::pair<std::size_t, std::size_t>>{{1, 0}});
  CHECK(hungarian({}).pairs.empty());
  CHECK_THROWS_AS(hungarian({{-1.0}}), std::invalid_argument);
}

TEST_CASE("hungarian matches factorial brute force") {
  std::mt19937_64 rng(17);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t r = 1 + rng() % 6, c = 1 + rng() % 6;
    std::vector<std::vector<double>> s(r, std::vector<double>(c));
    const bool coarse = trial % 3 == 0;  // many ties
    for (auto& row : s)
      for (auto& v : row) v = coarse ? static_cast<double>(rng() % 3) : u(rng);
    const auto a = hungarian(s);
    CHECK(a.total == doctest::Approx(brute_force(s)).epsilon(1e-12));
    CHECK(a.pairs.size() == std::min(r, c));
    std::set<std::size_t> rows, cols;
    for (auto [i, j] : a.pairs) rows.insert(i), cols.insert(j);
    CHECK(rows.size() == a.pairs.size());
    CHECK(cols.size() == a.pairs.size());
  }
}

TEST_CASE("cluster_match_trigger") {
  const TriggerCluster gold{{1, "Attack"}, {2, "Attack"}};
  CHECK(cluster_match_trigger(gold, gold) == 1.0);
  CHECK(cluster_match_trigger(gold, {{1, "Attack"}}) == 2.0 / 3.0);
  CHECK(cluster_match_trigger(gold, {{1, "Die"}, {2, "Die"}}) == 0.0);
  // Majority vote with a tie resolved by the earliest trigger.
  CHECK(majority_type({{5, "Die"}, {3, "Attack"}}) == "Attack");
  CHECK(majority_type({{1, "Die"}, {3, "Attack"}, {4, "Attack"}}) == "Attack");
}

TEST_CASE("cluster_match_argument fixtures") {
  const ArgumentCluster name_only{"Victim", {{sp(0, 1), MentionLevel::Name}}};
  CHECK(cluster_match_argument(name_only, name_only) == 1.0);
  const ArgumentCluster gold{"Victim", {{sp(0, 1), MentionLevel::Name}, {sp(5, 5), MentionLevel::Pronoun}}};
  const ArgumentCluster pron{"Victim", {{sp(5, 5), MentionLevel::Pronoun}}};
  CHECK(cluster_match_argument(gold, pron) == 0.25);
  CHECK(cluster_match_argument(gold, ArgumentCluster{"Agent", pron.mentions}) == 0.0);
  const ArgumentCluster spurious{"Victim", {{sp(0, 1), MentionLevel::Name}, {sp(7, 8), MentionLevel::Nominal}}};
  CHECK(cluster_match_argument(name_only, spurious) == 0.5);
  CHECK(cluster_match_argument(name_only, ArgumentCluster{"Victim", {}}) == 0.0);
  // Duplicate spans are counted once.
  const ArgumentCluster dup{"Victim", {{sp(0, 1), MentionLevel::Name}, {sp(0, 1), MentionLevel::Name}}};
  CHECK(cluster_match_argument(name_only, dup) == 1.0);
  // Partial overlap counts as a hit.
  CHECK(cluster_match_argument(name_only, ArgumentCluster{"Victim", {{sp(1, 2), MentionLevel::Name}}}) == 1.0);
}

TEST_CASE("cluster_match_argument falls as false positives grow") {
  const ArgumentCluster gold{"Victim", {{sp(0, 1), MentionLevel::Name}}};
  ArgumentCluster pred{"Victim", {{sp(0, 1), MentionLevel::Name}}};
  double prev = cluster_match_argument(gold, pred);
  for (std::size_t k = 0; k < 6; ++k) {
    pred.mentions.push_back({sp(10 + 2 * k, 10 + 2 * k), MentionLevel::Nominal});
    const double now = cluster_match_argument(gold, pred);
    CHECK(now <= prev);
    prev = now;
  }
}

TEST_CASE("doc_trigger fixtures") {
  const std::vector<TriggerCluster> gold{{{1, "Attack"}, {2, "Attack"}}};
  const std::vector<TriggerCluster> split{{{1, "Attack"}}, {{2, "Attack"}}};
  const auto r = doc_trigger(gold, split);
  const auto prf = r.counts.prf();
  CHECK(prf.p == doctest::Approx(1.0 / 3.0).epsilon(1e-15));
  CHECK(prf.r == doctest::Approx(2.0 / 3.0).epsilon(1e-15));
  CHECK(prf.f1 == doctest::Approx(4.0 / 9.0).epsilon(1e-15));
  const auto same = doc_trigger(gold, gold).counts.prf();
  CHECK(same.f1 == 1.0);
  const auto none = doc_trigger(gold, {}).counts.prf();
  CHECK(none.p == 0.0);
  CHECK(none.r == 0.0);
  CHECK(none.f1 == 0.0);
  const auto empty = doc_trigger({}, {}).counts.prf();
  CHECK(empty.f1 == 1.0);
}

TEST_CASE("doc_trigger ignores cluster order and ids") {
  std::mt19937_64 rng(3);
  synth::GenConfig g;
  g.seed = 2;
  g.n_docs = 40;
  for (const auto& d : synth::generate(g)) {
    auto gold = trigger_clusters(*d.gold);
    auto pred = gold;
    for (auto& c : pred)
      if (c.size() > 1 && rng() % 2) c.pop_back();
    const auto a = doc_trigger(gold, pred).counts.prf();
    std::shuffle(pred.begin(), pred.end(), rng);
    const auto b = doc_trigger(gold, pred).counts.prf();
    CHECK(a.f1 == doctest::Approx(b.f1).epsilon(1e-12));
    CHECK(a.f1 <= std::max(a.p, a.r));
  }
}

TEST_CASE("doc_argument fixtures") {
  Annotations gold;
  gold.triggers = {{3, "Die"}};
  gold.entities = {{sp(0, 1), "PER", MentionLevel::Name}, {sp(5, 5), "PER", MentionLevel::Pronoun}};
  gold.arguments = {{3, sp(5, 5), "Victim"}};
  gold.entity_clusters = {{0, 1}};
  gold.event_clusters = {{0}};

  SUBCASE("perfect extraction") {
    const auto d = score_document(gold, gold);
    CHECK(d.argument.prf().f1 == 1.0);
    CHECK(d.trigger.prf().f1 == 1.0);
  }
  SUBCASE("pronoun without its antecedent scores a quarter") {
    Annotations pred = gold;
    pred.entities = {{sp(5, 5), "PER", MentionLevel::Pronoun}};
    pred.entity_clusters = {{0}};
    const auto prf = score_document(gold, pred).argument.prf();
    CHECK(prf.p == 0.25);
    CHECK(prf.r == 0.25);
    CHECK(prf.f1 == 0.25);
  }
  SUBCASE("arguments of an unmatched predicted event only enlarge the predicted count") {
    Annotations pred = gold;
    pred.triggers.push_back({8, "Attack"});
    pred.entities.push_back({sp(9, 9), "PER", MentionLevel::Name});
    pred.entity_clusters = {{0, 1}, {2}};
    pred.arguments.push_back({8, sp(9, 9), "Attacker"});
    pred.event_clusters = {{0}, {1}};
    const auto d = score_document(gold, pred);
    CHECK(d.argument.n_pred == 2.0);
    CHECK(d.argument.n_gold == 1.0);
    CHECK(d.argument.matched == 1.0);
  }
}

TEST_CASE("component scores") {
  Annotations gold;
  gold.triggers = {{1, "Die"}, {4, "Attack"}};
  gold.event_clusters = {{0}, {1}};
  Annotations pred;
  pred.triggers = {{1, "Die"}};
  pred.event_clusters = {{0}};
  const auto c = component_counts(gold, pred);
  const auto trig = c.trig_c.prf();
  CHECK(trig.p == 1.0);
  CHECK(trig.r == 0.5);
  CHECK(trig.f1 == doctest::Approx(2.0 / 3.0).epsilon(1e-15));

  // MUC: gold {a,b,c} against {a,b},{c}.
  const MentionKey a{0, 0}, b{1, 1}, cc{2, 2};
  const auto m = muc({{a, b, cc}}, {{a, b}, {cc}}).prf();
  CHECK(m.r == 0.5);
  CHECK(m.p == 1.0);
  CHECK(m.f1 == doctest::Approx(2.0 / 3.0).epsilon(1e-15));
}

TEST_CASE("corpus scores on identical and empty predictions") {
  synth::GenConfig g;
  g.seed = 6;
  g.n_docs = 30;
  const auto docs = synth::generate(g);
  const auto same = score_corpus(docs, docs);
  for (const auto& p : {same.doc_trigger, same.doc_argument, same.trig_i, same.trig_c, same.arg_i, same.arg_c,
                        same.entity, same.evt_coref, same.ent_coref}) {
    CHECK(p.p == 1.0);
    CHECK(p.r == 1.0);
    CHECK(p.f1 == 1.0);
  }
  auto empty = docs;
  for (auto& d : empty) d.gold = Annotations{};
  const auto none = score_corpus(docs, empty);
  for (const auto& p : {none.doc_trigger, none.doc_argument, none.trig_i, none.trig_c, none.arg_i, none.arg_c,
                        none.entity, none.evt_coref, none.ent_coref})
    CHECK(p.f1 == 0.0);

  auto fewer = docs;
  fewer.pop_back();
  CHECK_THROWS_AS(score_corpus(docs, fewer), ValidationError);
  CHECK(same.to_json().rfind(R"({"doc_trigger":{"p":1.0,"r":1.0,"f1":1.0},"doc_argument")", 0) == 0);
}
