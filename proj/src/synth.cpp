#include "dvnee/synth.hpp"

#include <algorithm>
#include <cctype>
#include <numeric>
#include <random>
#include <set>
#include <cmath>
#include <cstdio>
#include <optional>
#include <stdexcept>
#include <tuple>

namespace dvnee::synth {

TypeInventory Schema::inventory(std::size_t k_max) const {
  TypeInventory inv;
  inv.event_types.emplace_back(TypeInventory::kNullType);
  inv.event_types.insert(inv.event_types.end(), event_types.begin(), event_types.end());
  inv.entity_types = entity_types;
  inv.argument_roles = roles;
  inv.k_max = k_max;
  return inv;
}

Schema default_schema() {
  Schema s;
  s.event_types = {"Attack", "Die", "Execute", "Sentence", "Injure", "Meet", "Transport", "Arrest-Jail", "Charge-Indict"};
  s.entity_types = {"PER", "ORG", "LOC", "WEA"};
  s.roles = {"Attacker", "Place",  "Instrument", "Victim",   "Person",      "Agent",
             "Defendant", "Adjudicator", "Entity", "Artifact", "Destination", "Prosecutor"};
  s.role_table = {
      {"Attack", {{"PER", "Attacker"}, {"LOC", "Place"}, {"WEA", "Instrument"}}},
      {"Die", {{"PER", "Victim"}, {"LOC", "Place"}, {"WEA", "Instrument"}}},
      {"Execute", {{"PER", "Person"}, {"LOC", "Place"}, {"ORG", "Agent"}}},
      {"Sentence", {{"PER", "Defendant"}, {"ORG", "Adjudicator"}, {"LOC", "Place"}}},
      {"Injure", {{"PER", "Victim"}, {"WEA", "Instrument"}}},
      {"Meet", {{"PER", "Entity"}, {"LOC", "Place"}}},
      {"Transport", {{"PER", "Artifact"}, {"LOC", "Destination"}}},
      {"Arrest-Jail", {{"PER", "Person"}, {"ORG", "Agent"}}},
      {"Charge-Indict", {{"PER", "Defendant"}, {"ORG", "Prosecutor"}}},
  };
  s.dependencies = {
      {{"Die", "Execute"}, {"Attack", "Sentence"}},
      {{"Transport", "Arrest-Jail"}, {"Meet", "Charge-Indict"}},
  };
  return s;
}

namespace {

void require(bool ok, const std::string& field, const std::string& why) {
  if (!ok) throw std::invalid_argument("generator config field '" + field + "': " + why);
}

bool rate_ok(double r) { return r >= 0.0 && r <= 1.0; }

std::string lower(std::string s) {
  for (auto& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return s;
}

}  // namespace

void GenConfig::validate() const {
  require(n_docs >= 0, "n_docs", "must be non-negative");
  for (auto [name, r] : {std::pair{"sentences_per_doc", sentences_per_doc}, {"tokens_per_sentence", tokens_per_sentence},
                         {"chain_length", chain_length}}) {
    require(r.lo >= 1 && r.lo <= r.hi, name, "range must satisfy 1 <= lo <= hi");
  }
  require(rate_ok(event_rate), "event_rate", "must lie in [0,1]");
  require(rate_ok(dependency_rate), "dependency_rate", "must lie in [0,1]");
  require(rate_ok(event_coref_rate), "event_coref_rate", "must lie in [0,1]");
  require(rate_ok(extra_mention_rate), "extra_mention_rate", "must lie in [0,1]");
  require(later_mentions.name >= 0 && later_mentions.nominal >= 0 && later_mentions.pronoun >= 0 &&
              later_mentions.name + later_mentions.nominal + later_mentions.pronoun > 0,
          "later_mentions", "weights must be non-negative with a positive sum");
  require(filler_vocab >= 1, "filler_vocab", "must be >= 1");
  require(name_pool >= 1, "name_pool", "must be >= 1");
  require(nominal_lexicon >= 1, "nominal_lexicon", "must be >= 1");
  require(!(event_rate > 0 && trigger_lexicon < 1), "trigger_lexicon", "events requested with an empty lexicon");
  require(!(event_rate > 0 && schema.event_types.empty()), "schema.event_types", "events requested with no types");
  if (event_rate > 0 && dependency_rate > 0) {
    require(ambiguous_lexicon >= 1, "ambiguous_lexicon", "dependency pairs requested with an empty lexicon");
    require(!schema.dependencies.empty(), "schema.dependencies", "dependency pairs requested with no rules");
  }
  const std::set<std::string> events(schema.event_types.begin(), schema.event_types.end());
  const std::set<std::string> entities(schema.entity_types.begin(), schema.entity_types.end());
  const std::set<std::string> roles(schema.roles.begin(), schema.roles.end());
  for (const auto& t : schema.event_types) {
    auto it = schema.role_table.find(t);
    require(it != schema.role_table.end() && !it->second.empty(), "schema.role_table", "no roles for '" + t + "'");
    for (const auto& [ent, role] : it->second) {
      require(entities.contains(ent), "schema.role_table", "unknown entity type '" + ent + "'");
      require(roles.contains(role), "schema.role_table", "unknown role '" + role + "'");
    }
  }
  for (const auto& d : schema.dependencies) {
    for (int b = 0; b < 2; ++b) {
      require(events.contains(d.targets[b]) && events.contains(d.companions[b]), "schema.dependencies",
              "rule references an unknown event type");
    }
    require(d.targets[0] != d.targets[1], "schema.dependencies", "targets must differ");
  }
}

int Lexicon::ambiguous_rule(const std::string& word) const {
  for (std::size_t g = 0; g < ambiguous.size(); ++g)
    if (std::find(ambiguous[g].begin(), ambiguous[g].end(), word) != ambiguous[g].end()) return static_cast<int>(g);
  return -1;
}

Lexicon build_lexicon(const GenConfig& cfg) {
  Lexicon lex;
  for (const auto& t : cfg.schema.event_types) {
    auto& words = lex.triggers[t];
    for (int i = 0; i < cfg.trigger_lexicon; ++i) words.push_back(lower(t) + "_" + std::to_string(i));
  }
  for (std::size_t g = 0; g < cfg.schema.dependencies.size(); ++g) {
    std::vector<std::string> words;
    for (int i = 0; i < cfg.ambiguous_lexicon; ++i) words.push_back("amb" + std::to_string(g) + "_" + std::to_string(i));
    lex.ambiguous.push_back(std::move(words));
  }
  for (int i = 0; i < cfg.filler_vocab; ++i) lex.filler.push_back("w" + std::to_string(i));
  for (const auto& e : cfg.schema.entity_types) {
    const auto base = lower(e);
    for (int i = 0; i < cfg.name_pool; ++i) lex.names[e].push_back(base + "_n" + std::to_string(i));
    for (int i = 0; i < cfg.nominal_lexicon; ++i) lex.nominals[e].push_back(base + "_nom" + std::to_string(i));
    if (e == "PER") {
      lex.pronouns[e] = {"he", "she"};
    } else if (e == "LOC") {
      lex.pronouns[e] = {"there"};
    } else {
      lex.pronouns[e] = {"it"};
    }
  }
  return lex;
}

// ---------------------------------------------------------------------------

namespace {

struct EntityState {
  std::string type;
  std::vector<std::string> name;
  std::string pronoun;
  int mentions = 0;
  int budget = 1;
};

struct ArgRef {
  std::size_t item = 0;  // mention item in the sentence
  std::string role;
};

struct Item {
  std::vector<std::string> tokens;
  bool is_trigger = false;
  // trigger fields
  std::string event_type;
  std::size_t event_id = 0;
  std::vector<ArgRef> args;
  // mention fields
  std::size_t entity_id = 0;
  MentionLevel level = MentionLevel::Name;
};

struct PendingRemention {
  std::size_t sentence = 0;
  std::size_t event_id = 0;
  std::string type;
  std::vector<std::pair<std::size_t, std::string>> args;  // (entity, role)
};

class DocBuilder {
 public:
  DocBuilder(const GenConfig& cfg, const Lexicon& lex, std::mt19937_64& rng) : cfg_(cfg), lex_(lex), rng_(rng) {}

  Document build(const std::string& doc_id);

 private:
  int uniform_int(int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng_); }
  double uniform() { return std::uniform_real_distribution<double>(0.0, 1.0)(rng_); }
  template <class T>
  const T& pick(const std::vector<T>& v) {
    return v[static_cast<std::size_t>(uniform_int(0, static_cast<int>(v.size()) - 1))];
  }

  std::size_t new_entity(const std::string& type);
  /// Adds a mention item for an entity of `type`, reusing an entity when
  /// possible. Returns the item index, or nullopt when none fits.
  std::optional<std::size_t> add_mention(std::vector<Item>& items, const std::string& type, bool allow_new);
  std::size_t add_mention_of(std::vector<Item>& items, std::size_t entity);
  std::size_t add_trigger(std::vector<Item>& items, const std::string& type, const std::string& word, std::size_t event_id);
  void add_arguments(std::vector<Item>& items, std::size_t trigger_item);
  void assemble(std::vector<Item>& items);

  const GenConfig& cfg_;
  const Lexicon& lex_;
  std::mt19937_64& rng_;

  Document doc_;
  Annotations gold_;
  std::vector<EntityState> entities_;
  std::vector<std::size_t> mention_entity_;  // per gold mention
  std::vector<std::size_t> trigger_event_;   // per gold trigger
  std::set<std::size_t> in_sentence_;        // entities already mentioned in this sentence
  std::size_t next_event_ = 0;
};

std::size_t DocBuilder::new_entity(const std::string& type) {
  EntityState e;
  e.type = type;
  const int len = uniform_int(1, 2);
  for (int i = 0; i < len; ++i) e.name.push_back(pick(lex_.names.at(type)));
  e.pronoun = pick(lex_.pronouns.at(type));
  e.budget = uniform_int(cfg_.chain_length.lo, cfg_.chain_length.hi);
  entities_.push_back(std::move(e));
  return entities_.size() - 1;
}

std::size_t DocBuilder::add_mention_of(std::vector<Item>& items, std::size_t entity) {
  auto& e = entities_[entity];
  Item it;
  it.entity_id = entity;
  if (e.mentions == 0) {
    it.level = MentionLevel::Name;
  } else {
    const auto& mix = cfg_.later_mentions;
    const double u = uniform() * (mix.name + mix.nominal + mix.pronoun);
    it.level = u < mix.name ? MentionLevel::Name : (u < mix.name + mix.nominal ? MentionLevel::Nominal : MentionLevel::Pronoun);
  }
  switch (it.level) {
    case MentionLevel::Name: it.tokens = e.name; break;
    case MentionLevel::Nominal: it.tokens = {"the", pick(lex_.nominals.at(e.type))}; break;
    case MentionLevel::Pronoun: it.tokens = {e.pronoun}; break;
  }
  ++e.mentions;
  in_sentence_.insert(entity);
  items.push_back(std::move(it));
  return items.size() - 1;
}

std::optional<std::size_t> DocBuilder::add_mention(std::vector<Item>& items, const std::string& type, bool allow_new) {
  std::vector<std::size_t> reusable;
  for (std::size_t i = 0; i < entities_.size(); ++i) {
    const auto& e = entities_[i];
    if (e.type == type && e.mentions < e.budget && !in_sentence_.contains(i)) reusable.push_back(i);
  }
  if (!reusable.empty() && (!allow_new || uniform() < 0.6)) return add_mention_of(items, pick(reusable));
  if (!allow_new) return std::nullopt;
  return add_mention_of(items, new_entity(type));
}

std::size_t DocBuilder::add_trigger(std::vector<Item>& items, const std::string& type, const std::string& word,
                                    std::size_t event_id) {
  Item it;
  it.is_trigger = true;
  it.tokens = {word};
  it.event_type = type;
  it.event_id = event_id;
  items.push_back(std::move(it));
  return items.size() - 1;
}

void DocBuilder::add_arguments(std::vector<Item>& items, std::size_t trigger_item) {
  const auto& table = cfg_.schema.role_table.at(items[trigger_item].event_type);
  std::vector<std::pair<std::string, std::string>> slots(table.begin(), table.end());
  std::shuffle(slots.begin(), slots.end(), rng_);
  const int k = std::min<int>(uniform_int(1, 2), static_cast<int>(slots.size()));
  for (int i = 0; i < k; ++i) {
    if (auto m = add_mention(items, slots[i].first, /*allow_new=*/true)) {
      items[trigger_item].args.push_back({*m, slots[i].second});
    }
  }
}

void DocBuilder::assemble(std::vector<Item>& items) {
  std::vector<std::size_t> order(items.size());
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), rng_);

  std::size_t need = 0;
  for (const auto& it : items) need += it.tokens.size();
  if (!items.empty()) need += items.size() - 1;
  const std::size_t target = std::max<std::size_t>(need, static_cast<std::size_t>(uniform_int(
                                                              cfg_.tokens_per_sentence.lo, cfg_.tokens_per_sentence.hi)));
  std::vector<std::size_t> gaps(items.size() + 1, 0);
  for (std::size_t g = 1; g + 1 < gaps.size(); ++g) gaps[g] = 1;
  for (std::size_t extra = target - need; extra > 0; --extra) {
    ++gaps[static_cast<std::size_t>(uniform_int(0, static_cast<int>(gaps.size()) - 1))];
  }

  const std::size_t sentence = doc_.sentences.size();
  const std::size_t start = doc_.tokens.size();
  std::vector<std::size_t> item_start(items.size());
  auto fill = [&](std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) doc_.tokens.push_back(pick(lex_.filler));
  };
  for (std::size_t pos = 0; pos < order.size(); ++pos) {
    fill(gaps[pos]);
    const auto& it = items[order[pos]];
    item_start[order[pos]] = doc_.tokens.size();
    doc_.tokens.insert(doc_.tokens.end(), it.tokens.begin(), it.tokens.end());
  }
  fill(gaps.back());
  doc_.sentences.push_back({start, doc_.tokens.size()});

  // Mentions and triggers are emitted in token order.
  std::map<std::size_t, std::size_t> mention_index;  // item -> gold entity index
  for (std::size_t pos = 0; pos < order.size(); ++pos) {
    const auto idx = order[pos];
    const auto& it = items[idx];
    const std::size_t s = item_start[idx];
    if (it.is_trigger) {
      gold_.triggers.push_back({s, it.event_type});
      trigger_event_.push_back(it.event_id);
    } else {
      mention_index[idx] = gold_.entities.size();
      gold_.entities.push_back({Span{s, s + it.tokens.size() - 1, sentence}, entities_[it.entity_id].type, it.level});
      mention_entity_.push_back(it.entity_id);
    }
  }
  for (std::size_t pos = 0; pos < order.size(); ++pos) {
    const auto& it = items[order[pos]];
    if (!it.is_trigger) continue;
    for (const auto& a : it.args) {
      gold_.arguments.push_back({item_start[order[pos]], gold_.entities[mention_index.at(a.item)].span, a.role});
    }
  }
}

Document DocBuilder::build(const std::string& doc_id) {
  doc_ = Document{};
  doc_.doc_id = doc_id;
  gold_ = Annotations{};

  const auto& schema = cfg_.schema;
  const int n_sent = uniform_int(cfg_.sentences_per_doc.lo, cfg_.sentences_per_doc.hi);
  // Each document commits to one branch per dependency rule and never uses
  // the other branch's companion type, so a companion fixes the reading.
  std::vector<int> branch(schema.dependencies.size());
  std::set<std::string> excluded;
  for (std::size_t g = 0; g < branch.size(); ++g) {
    branch[g] = uniform_int(0, 1);
    excluded.insert(schema.dependencies[g].companions[1 - branch[g]]);
  }
  std::vector<std::string> standalone_types;
  for (const auto& t : schema.event_types)
    if (!excluded.contains(t)) standalone_types.push_back(t);

  std::vector<PendingRemention> pending;
  for (int s = 0; s < n_sent; ++s) {
    in_sentence_.clear();
    std::vector<Item> items;

    for (const auto& p : pending) {
      if (p.sentence != static_cast<std::size_t>(s)) continue;
      const auto& words = lex_.triggers.at(p.type);
      const auto t = add_trigger(items, p.type, pick(words), p.event_id);
      for (const auto& [entity, role] : p.args) {
        if (in_sentence_.contains(entity) || uniform() >= 0.5) continue;
        const auto m = add_mention_of(items, entity);
        items[t].args.push_back({m, role});
      }
    }

    if (!standalone_types.empty() && uniform() < cfg_.event_rate) {
      if (!schema.dependencies.empty() && uniform() < cfg_.dependency_rate) {
        const auto g = static_cast<std::size_t>(uniform_int(0, static_cast<int>(schema.dependencies.size()) - 1));
        const auto& rule = schema.dependencies[g];
        const auto& companion = rule.companions[branch[g]];
        const auto& target = rule.targets[branch[g]];
        const auto c = add_trigger(items, companion, pick(lex_.triggers.at(companion)), next_event_++);
        add_arguments(items, c);
        const auto a = add_trigger(items, target, pick(lex_.ambiguous[g]), next_event_++);
        add_arguments(items, a);
      } else {
        const auto& type = pick(standalone_types);
        const auto id = next_event_++;
        const auto t = add_trigger(items, type, pick(lex_.triggers.at(type)), id);
        add_arguments(items, t);
        if (s + 1 < n_sent && uniform() < cfg_.event_coref_rate) {
          PendingRemention p{static_cast<std::size_t>(uniform_int(s + 1, n_sent - 1)), id, type, {}};
          for (const auto& a : items[t].args) p.args.emplace_back(items[a.item].entity_id, a.role);
          pending.push_back(std::move(p));
        }
      }
    }

    if (uniform() < cfg_.extra_mention_rate) {
      add_mention(items, pick(schema.entity_types), /*allow_new=*/true);
    }
    assemble(items);
  }

  // Clusters group mentions by entity and triggers by event.
  std::map<std::size_t, std::vector<std::size_t>> by_entity, by_event;
  for (std::size_t m = 0; m < mention_entity_.size(); ++m) by_entity[mention_entity_[m]].push_back(m);
  for (std::size_t t = 0; t < trigger_event_.size(); ++t) by_event[trigger_event_[t]].push_back(t);
  for (auto& [_, c] : by_entity) gold_.entity_clusters.push_back(std::move(c));
  for (auto& [_, c] : by_event) gold_.event_clusters.push_back(std::move(c));
  std::sort(gold_.arguments.begin(), gold_.arguments.end(), [](const Argument& a, const Argument& b) {
    return std::tie(a.trigger, a.span.start, a.span.end) < std::tie(b.trigger, b.span.start, b.span.end);
  });

  doc_.gold = std::move(gold_);
  mention_entity_.clear();
  trigger_event_.clear();
  entities_.clear();
  next_event_ = 0;
  normalize_and_validate(doc_);
  return std::move(doc_);
}

}  // namespace

std::vector<Document> generate(const GenConfig& cfg) {
  cfg.validate();
  const auto lex = build_lexicon(cfg);
  std::mt19937_64 rng(cfg.seed);
  std::vector<Document> docs;
  docs.reserve(static_cast<std::size_t>(cfg.n_docs));
  DocBuilder builder(cfg, lex, rng);
  for (int d = 0; d < cfg.n_docs; ++d) {
    char id[32];
    std::snprintf(id, sizeof id, "doc%05d", d);
    docs.push_back(builder.build(id));
  }
  return docs;
}

Splits split(const std::vector<Document>& corpus, const double (&ratios)[3], std::uint64_t seed) {
  for (double r : ratios)
    if (!(r >= 0.0 && r <= 1.0)) throw std::invalid_argument("split ratios must lie in [0,1]");
  if (std::abs(ratios[0] + ratios[1] + ratios[2] - 1.0) > 1e-9) throw std::invalid_argument("split ratios must sum to 1");
  const std::size_t n = corpus.size();
  const auto n_dev = static_cast<std::size_t>(std::llround(ratios[1] * static_cast<double>(n)));
  const auto n_test = std::min(n - n_dev, static_cast<std::size_t>(std::llround(ratios[2] * static_cast<double>(n))));
  std::vector<std::size_t> perm(n);
  std::iota(perm.begin(), perm.end(), 0);
  std::mt19937_64 rng(seed);
  std::shuffle(perm.begin(), perm.end(), rng);
  std::vector<int> bucket(n, 0);
  for (std::size_t i = 0; i < n_dev; ++i) bucket[perm[i]] = 1;
  for (std::size_t i = n_dev; i < n_dev + n_test; ++i) bucket[perm[i]] = 2;
  Splits out;
  for (std::size_t i = 0; i < n; ++i) {
    (bucket[i] == 0 ? out.train : bucket[i] == 1 ? out.dev : out.test).push_back(corpus[i]);
  }
  return out;
}

}  // namespace dvnee::synth
