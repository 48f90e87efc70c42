#include <doctest.h>

#include <algorithm>
#include <map>
#include <random>
#include <set>

#include "dvnee/doc_model.hpp"

using namespace dvnee;

namespace {

const char* kDied =
    R"({"doc_id":"d1","tokens":["He","died","."],"sentences":[[0,3]],"triggers":[{"token":1,"type":"Die"}],)"
    R"("arguments":[{"trigger":1,"start":0,"end":0,"role":"Victim"}],)"
    R"("entities":[{"start":0,"end":0,"type":"PER","level":"pronoun"}],"entity_clusters":[[0]],"event_clusters":[[0]]})";

std::string rule_of(const std::string& line) {
  try {
    parse_document(line);
  } catch (const ValidationError& e) {
    return e.rule();
  }
  return "";
}

}  // namespace

TEST_CASE("parse_document reads a minimal record") {
  const auto doc = parse_document(kDied);
  CHECK(doc.doc_id == "d1");
  CHECK(doc.token_count() == 3);
  REQUIRE(doc.gold);
  REQUIRE(doc.gold->triggers.size() == 1);
  CHECK(doc.gold->triggers[0] == Trigger{1, "Die"});
  CHECK(doc.gold->entities[0].level == MentionLevel::Pronoun);
  CHECK(serialize_document(doc) == kDied);
}

TEST_CASE("raw records carry no annotations") {
  const auto doc = parse_document(R"({"doc_id":"x","tokens":["a","b"],"sentences":[[0,1],[1,2]]})");
  CHECK_FALSE(doc.gold);
  CHECK(serialize_document(doc) == R"({"doc_id":"x","tokens":["a","b"],"sentences":[[0,1],[1,2]]})");
}

TEST_CASE("argument span absent from entities is a validation error") {
  const std::string line =
      R"({"doc_id":"d","tokens":["He","died","."],"sentences":[[0,3]],"triggers":[{"token":1,"type":"Die"}],)"
      R"("arguments":[{"trigger":1,"start":0,"end":0,"role":"Victim"}],"entities":[]})";
  CHECK(rule_of(line) == "argument_entity");
}

TEST_CASE("validation names the broken rule") {
  CHECK(rule_of(R"({"doc_id":"d","tokens":[],"sentences":[]})") == "token_count");
  CHECK(rule_of(R"({"doc_id":"d","tokens":["a","b"],"sentences":[[0,1]]})") == "sentence_cover");
  CHECK(rule_of(R"({"doc_id":"d","tokens":["a","b"],"sentences":[[1,2],[0,1]]})") == "sentence_cover");
  CHECK(rule_of(R"({"doc_id":"d","tokens":["a","b"],"sentences":[[0,1],[1,2]],)"
                R"("entities":[{"start":0,"end":1,"type":"PER","level":"name"}]})") == "span_in_sentence");
  CHECK(rule_of(R"({"doc_id":"d","tokens":["a","b"],"sentences":[[0,2]],)"
                R"("triggers":[{"token":0,"type":"A"},{"token":0,"type":"B"}]})") == "trigger_unique");
  CHECK(rule_of(R"({"doc_id":"d","tokens":["a","b"],"sentences":[[0,2]],)"
                R"("triggers":[{"token":0,"type":"A"},{"token":1,"type":"B"}],"event_clusters":[[0,1]]})") ==
        "event_cluster_type");
  CHECK(rule_of(R"({"doc_id":"d","tokens":["a","b"],"sentences":[[0,2]],)"
                R"("triggers":[{"token":0,"type":"A"},{"token":1,"type":"A"}],"event_clusters":[[0,1],[1]]})") ==
        "cluster_disjoint");
  CHECK(rule_of(R"({"doc_id":"d","tokens":["a","b"],"sentences":[[0,2]],)"
                R"("triggers":[{"token":0,"type":"A"}],"event_clusters":[[3]]})") == "cluster_member");
  CHECK(rule_of(R"({"doc_id":"d","tokens":["a"],"sentences":[[0,1]],"triggers":[{"token":0,"type":"NULL"}]})") ==
        "trigger_type");
}

TEST_CASE("malformed records raise parse errors naming the field") {
  auto field_of = [](const std::string& line, std::size_t no) {
    try {
      parse_document(line, no);
    } catch (const ParseError& e) {
      CHECK(e.line() == no);
      return e.field();
    }
    return std::string("<none>");
  };
  CHECK(field_of("{not json", 7) == "<record>");
  CHECK(field_of(R"({"tokens":["a"],"sentences":[[0,1]]})", 2) == "doc_id");
  CHECK(field_of(R"({"doc_id":"d","tokens":"a","sentences":[[0,1]]})", 3) == "tokens");
  CHECK(field_of(R"({"doc_id":"d","tokens":["a"],"sentences":[[0,1]],"entities":[{"start":0,"end":0,"type":"P","level":"x"}]})",
                 4) == "entities.level");
}

TEST_CASE("clusters are normalized with missing mentions as singletons") {
  const auto doc = parse_document(
      R"({"doc_id":"d","tokens":["a","b","c"],"sentences":[[0,3]],)"
      R"("triggers":[{"token":0,"type":"A"},{"token":1,"type":"A"},{"token":2,"type":"A"}],"event_clusters":[[2,0]]})");
  CHECK(doc.gold->event_clusters == ClusterSet{{0, 2}, {1}});
}

TEST_CASE("enumerate_spans small cases") {
  Document doc{"d", {"a", "b", "c"}, {{0, 3}}, {}};
  const auto spans = enumerate_spans(doc, 2);
  REQUIRE(spans.size() == 5);
  const std::vector<std::pair<std::size_t, std::size_t>> expect{{0, 0}, {0, 1}, {1, 1}, {1, 2}, {2, 2}};
  for (std::size_t i = 0; i < spans.size(); ++i) {
    CHECK(spans[i].start == expect[i].first);
    CHECK(spans[i].end == expect[i].second);
  }
  Document five{"d", {"a", "b", "c", "d", "e"}, {{0, 5}}, {}};
  CHECK(enumerate_spans(five, 12).size() == 15);
}

TEST_CASE("enumerate_spans never crosses a sentence boundary") {
  Document doc{"d", {"a", "b", "c", "d", "e", "f"}, {{0, 3}, {3, 6}}, {}};
  const auto spans = enumerate_spans(doc, 3);
  // Brute force: every (start, end) pair with width <= 3 that does not straddle 3.
  std::set<std::pair<std::size_t, std::size_t>> expect;
  for (std::size_t s = 0; s < 6; ++s)
    for (std::size_t e = s; e < 6 && e - s + 1 <= 3; ++e)
      if (!(s < 3 && e >= 3)) expect.insert({s, e});
  std::set<std::pair<std::size_t, std::size_t>> got;
  for (const auto& sp : spans) {
    CHECK_FALSE((sp.start < 3 && sp.end >= 3));
    got.insert({sp.start, sp.end});
  }
  CHECK(got == expect);
  CHECK(std::is_sorted(spans.begin(), spans.end()));
}

TEST_CASE("enumerate_spans count formula over random sentence layouts") {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<SentenceBounds> sents;
    std::size_t cursor = 0;
    const int ns = 1 + static_cast<int>(rng() % 6);
    for (int s = 0; s < ns; ++s) {
      const std::size_t len = 1 + rng() % 25;
      sents.push_back({cursor, cursor + len});
      cursor += len;
    }
    const std::size_t k = 1 + rng() % 14;
    std::size_t expect = 0;
    for (const auto& s : sents)
      for (std::size_t w = 1; w <= std::min(k, s.size()); ++w) expect += s.size() - w + 1;
    CHECK(enumerate_spans(sents, k).size() == expect);
  }
}

TEST_CASE("clusters_from_antecedents basics") {
  using L = std::vector<std::optional<std::size_t>>;
  CHECK(clusters_from_antecedents(L{std::nullopt, 0, 1}) == ClusterSet{{0, 1, 2}});
  CHECK(clusters_from_antecedents(L{std::nullopt, std::nullopt, std::nullopt}) == ClusterSet{{0}, {1}, {2}});
  CHECK_THROWS_AS(clusters_from_antecedents(L{std::nullopt, 2, std::nullopt}), std::invalid_argument);
  CHECK_THROWS_AS(clusters_from_antecedents(L{0}), std::invalid_argument);
}

TEST_CASE("clusters_from_antecedents matches brute-force transitive closure") {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 500; ++trial) {
    const std::size_t n = 1 + rng() % 8;
    std::vector<std::optional<std::size_t>> links(n);
    for (std::size_t m = 1; m < n; ++m)
      if (rng() % 2) links[m] = rng() % m;
    // Closure by repeated relaxation over an adjacency matrix.
    std::vector<std::vector<bool>> reach(n, std::vector<bool>(n, false));
    for (std::size_t m = 0; m < n; ++m) {
      reach[m][m] = true;
      if (links[m]) reach[m][*links[m]] = reach[*links[m]][m] = true;
    }
    for (std::size_t k = 0; k < n; ++k)
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j)
          if (reach[i][k] && reach[k][j]) reach[i][j] = true;
    const auto clusters = clusters_from_antecedents(links);
    std::vector<std::size_t> id(n);
    for (std::size_t c = 0; c < clusters.size(); ++c)
      for (auto m : clusters[c]) id[m] = c;
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j) CHECK((id[i] == id[j]) == reach[i][j]);
  }
}

TEST_CASE("clusters_from_antecedents is idempotent under relinking to the first mention") {
  std::mt19937_64 rng(9);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t n = 1 + rng() % 10;
    std::vector<std::optional<std::size_t>> links(n);
    for (std::size_t m = 1; m < n; ++m)
      if (rng() % 3) links[m] = rng() % m;
    const auto clusters = clusters_from_antecedents(links);
    std::vector<std::optional<std::size_t>> relinked(n);
    for (const auto& c : clusters)
      for (std::size_t i = 1; i < c.size(); ++i) relinked[c[i]] = c.front();
    CHECK(clusters_from_antecedents(relinked) == clusters);
  }
}

TEST_CASE("inventory requires NULL first and unique names") {
  TypeInventory inv{{"NULL", "Die"}, {"PER"}, {"Victim"}, 12};
  CHECK_NOTHROW(inv.validate());
  CHECK(inv.event_index("Die") == 1);
  inv.event_types = {"Die", "NULL"};
  CHECK_THROWS_AS(inv.validate(), ValidationError);
  inv.event_types = {"NULL", "Die", "Die"};
  CHECK_THROWS_AS(inv.validate(), ValidationError);
}
