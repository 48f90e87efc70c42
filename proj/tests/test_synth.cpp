#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <set>

#include "dvnee/synth.hpp"

using namespace dvnee;
using namespace dvnee::synth;

namespace {

GenConfig small_config(std::uint64_t seed, int n_docs) {
  GenConfig cfg;
  cfg.seed = seed;
  cfg.n_docs = n_docs;
  return cfg;
}

std::string dump(const std::vector<Document>& docs) {
  std::string out;
  for (const auto& d : docs) out += serialize_document(d) + "\n";
  return out;
}

}  // namespace

TEST_CASE("generate emits the requested number of documents") {
  CHECK(generate(small_config(1, 2)).size() == 2);
  CHECK(generate(small_config(1, 0)).empty());
}

TEST_CASE("generation is deterministic per seed") {
  const auto a = dump(generate(small_config(42, 30)));
  const auto b = dump(generate(small_config(42, 30)));
  CHECK(a == b);
  CHECK(a != dump(generate(small_config(43, 30))));
}

TEST_CASE("inconsistent configs are rejected") {
  auto expect_field = [](const GenConfig& cfg, const std::string& field) {
    try {
      cfg.validate();
    } catch (const std::invalid_argument& e) {
      CHECK(std::string(e.what()).find(field) != std::string::npos);
      return;
    }
    FAIL("config accepted");
  };
  auto cfg = small_config(1, 1);
  cfg.event_rate = 1.5;
  expect_field(cfg, "event_rate");
  cfg = small_config(1, 1);
  cfg.trigger_lexicon = 0;
  expect_field(cfg, "trigger_lexicon");
  cfg = small_config(1, 1);
  cfg.ambiguous_lexicon = 0;
  expect_field(cfg, "ambiguous_lexicon");
  cfg = small_config(1, 1);
  cfg.tokens_per_sentence = {5, 3};
  expect_field(cfg, "tokens_per_sentence");
  CHECK_THROWS_AS(generate(cfg), std::invalid_argument);
}

TEST_CASE("ambiguous pair fraction tracks the dependency rate") {
  auto cfg = small_config(7, 4000);
  cfg.dependency_rate = 0.3;
  const auto lex = build_lexicon(cfg);
  std::size_t units = 0, pairs = 0;
  for (const auto& d : generate(cfg)) {
    std::size_t amb = 0;
    for (const auto& t : d.gold->triggers) amb += lex.ambiguous_rule(d.tokens[t.token]) >= 0;
    pairs += amb;
    // A pair contributes two singleton clusters; every other cluster is one unit.
    units += d.gold->event_clusters.size() - amb;
  }
  REQUIRE(units >= 10000);
  const double frac = static_cast<double>(pairs) / static_cast<double>(units);
  CHECK(std::abs(frac - 0.3) <= 0.02);
}

TEST_CASE("fuzz: generated annotations satisfy every invariant and round-trip") {
  auto cfg = small_config(99, 10000);
  const auto docs = generate(cfg);
  const auto inv = cfg.schema.inventory();
  for (const auto& d : docs) {
    CHECK_NOTHROW(validate(d));
    CHECK_NOTHROW(validate_against(d, inv));
    const auto line = serialize_document(d);
    CHECK(serialize_document(parse_document(line)) == line);
    for (const auto& a : d.gold->arguments) {
      CHECK(d.sentence_of(a.trigger) == d.sentence_of(a.span.start));
    }
  }
}

TEST_CASE("entity chains open with a name and use lower levels later") {
  const auto docs = generate(small_config(3, 300));
  std::size_t nominal = 0, pronoun = 0, cross_sentence = 0;
  for (const auto& d : docs) {
    for (const auto& c : d.gold->entity_clusters) {
      CHECK(d.gold->entities[c.front()].level == MentionLevel::Name);
      for (auto m : c) {
        nominal += d.gold->entities[m].level == MentionLevel::Nominal;
        pronoun += d.gold->entities[m].level == MentionLevel::Pronoun;
      }
      if (c.size() > 1 && d.sentence_of(d.gold->entities[c.back()].span.start) !=
                              d.sentence_of(d.gold->entities[c.front()].span.start))
        ++cross_sentence;
    }
  }
  CHECK(nominal > 0);
  CHECK(pronoun > 0);
  CHECK(cross_sentence > 0);
}

TEST_CASE("ambiguous triggers are resolved only by their companion") {
  auto cfg = small_config(5, 2000);
  const auto lex = build_lexicon(cfg);
  const auto corpus = generate(cfg);
  const double ratios[3] = {0.5, 0.0, 0.5};
  const auto parts = split(corpus, ratios, 1);

  // Lexicon lookup: the majority type of each ambiguous word in training data.
  std::map<std::string, std::map<std::string, int>> counts;
  for (const auto& d : parts.train)
    for (const auto& t : d.gold->triggers)
      if (lex.ambiguous_rule(d.tokens[t.token]) >= 0) ++counts[d.tokens[t.token]][t.type];

  std::size_t total = 0, lookup_ok = 0, cheat_ok = 0;
  for (const auto& d : parts.test) {
    for (const auto& t : d.gold->triggers) {
      const int g = lex.ambiguous_rule(d.tokens[t.token]);
      if (g < 0) continue;
      ++total;
      const auto& c = counts[d.tokens[t.token]];
      const auto best = std::max_element(c.begin(), c.end(),
                                         [](const auto& a, const auto& b) { return a.second < b.second; });
      lookup_ok += best != c.end() && best->first == t.type;
      // Cheating: read the companion's true type from the same sentence.
      const auto& rule = cfg.schema.dependencies[static_cast<std::size_t>(g)];
      std::string guess;
      for (const auto& o : d.gold->triggers) {
        if (o.token == t.token || d.sentence_of(o.token) != d.sentence_of(t.token)) continue;
        for (int b = 0; b < 2; ++b)
          if (o.type == rule.companions[b]) guess = rule.targets[b];
      }
      cheat_ok += guess == t.type;
    }
  }
  REQUIRE(total > 200);
  CHECK(cheat_ok == total);
  CHECK(static_cast<double>(lookup_ok) / static_cast<double>(total) <= 0.6);
}

TEST_CASE("split sizes and coverage") {
  const auto corpus = generate(small_config(8, 100));
  const double r1[3] = {0.8, 0.1, 0.1};
  const auto s = split(corpus, r1, 3);
  CHECK(s.train.size() == 80);
  CHECK(s.dev.size() == 10);
  CHECK(s.test.size() == 10);

  const double r2[3] = {1.0, 0.0, 0.0};
  const auto all = split(corpus, r2, 3);
  CHECK(all.train.size() == 100);
  CHECK(dump(all.train) == dump(corpus));

  std::multiset<std::string> whole, parts;
  for (const auto& d : corpus) whole.insert(serialize_document(d));
  for (const auto* p : {&s.train, &s.dev, &s.test})
    for (const auto& d : *p) parts.insert(serialize_document(d));
  CHECK(whole == parts);

  CHECK(dump(split(corpus, r1, 3).dev) == dump(s.dev));
  const double bad[3] = {0.5, 0.5, 0.5};
  CHECK_THROWS_AS(split(corpus, bad, 1), std::invalid_argument);
}
