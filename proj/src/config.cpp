#include "dvnee/config.hpp"

#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

namespace dvnee {

using nlohmann::json;
using nlohmann::ordered_json;

ConfigError::ConfigError(const std::string& field, const std::string& what)
    : std::invalid_argument(field + ": " + what), field_(field) {}

namespace {

// Reads the keys of one JSON object, rejecting any it does not consume.
class Section {
 public:
  Section(const json& obj, std::string path) : obj_(obj), path_(std::move(path)) {
    if (!obj_.is_object()) throw ConfigError(path_.empty() ? "<root>" : path_, "expected an object");
  }

  std::string field(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }
  bool has(const std::string& key) const { return obj_.contains(key); }

  template <class T>
  void get(const std::string& key, T& out) {
    seen_.insert(key);
    if (!obj_.contains(key)) return;
    try {
      out = obj_.at(key).get<T>();
    } catch (const json::exception&) {
      throw ConfigError(field(key), "wrong type (" + std::string(obj_.at(key).type_name()) + ")");
    }
  }

  void get(const std::string& key, synth::IntRange& out) {
    std::vector<int> v{out.lo, out.hi};
    get(key, v);
    if (v.size() != 2) throw ConfigError(field(key), "expected [lo, hi]");
    out = {v[0], v[1]};
  }

  Section child(const std::string& key) {
    seen_.insert(key);
    static const json empty = json::object();
    return Section(obj_.contains(key) ? obj_.at(key) : empty, field(key));
  }

  void finish() const {
    for (const auto& [k, v] : obj_.items())
      if (!seen_.contains(k)) throw ConfigError(field(k), "unknown field");
  }

 private:
  const json& obj_;
  std::string path_;
  std::set<std::string> seen_;
};

void require(bool ok, const std::string& field, const std::string& what) {
  if (!ok) throw ConfigError(field, what);
}

}  // namespace

void RunConfig::validate() const {
  try {
    generator.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError("generator", e.what());
  }
  double sum = 0.0;
  for (double r : split) {
    require(r >= 0.0 && r <= 1.0, "generator.split", "ratios must lie in [0,1]");
    sum += r;
  }
  require(std::abs(sum - 1.0) < 1e-9, "generator.split", "ratios must sum to 1");
  try {
    types.validate();
  } catch (const std::exception& e) {
    throw ConfigError("types", e.what());
  }
  require(features.d_tok >= 4, "features.d_tok", "must be >= 4");
  require(features.kind != FeatureKind::Lookup || features.buckets > 0, "features.buckets", "must be positive");
  require(dims.hidden > 0, "model.hidden", "must be positive");
  require(dims.d_width > 0, "model.d_width", "must be positive");
  require(dims.max_antecedents > 0, "model.max_antecedents", "must be positive");
  try {
    dvn.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError("dvn", e.what());
  }
  try {
    train.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError("optim", e.what());
  }
  require(train.optim.beta1 >= 0 && train.optim.beta1 < 1, "optim.beta1", "must lie in [0,1)");
  require(train.optim.beta2 >= 0 && train.optim.beta2 < 1, "optim.beta2", "must lie in [0,1)");
  require(train.optim.epsilon > 0, "optim.epsilon", "must be positive");
}

RunConfig parse_config(const std::string& text) {
  json root;
  try {
    root = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError("<root>", std::string("not valid JSON: ") + e.what());
  }
  RunConfig c;
  Section top(root, "");
  if (!top.has("seed")) throw ConfigError("seed", "missing required field");
  top.get("seed", c.seed);

  {
    auto s = top.child("paths");
    s.get("corpus_dir", c.paths.corpus_dir);
    s.get("checkpoint", c.paths.checkpoint);
    s.get("log", c.paths.log);
    s.get("predictions", c.paths.predictions);
    s.finish();
  }
  {
    auto& g = c.generator;
    auto s = top.child("generator");
    s.get("n_docs", g.n_docs);
    s.get("sentences_per_doc", g.sentences_per_doc);
    s.get("tokens_per_sentence", g.tokens_per_sentence);
    s.get("event_rate", g.event_rate);
    s.get("dependency_rate", g.dependency_rate);
    s.get("event_coref_rate", g.event_coref_rate);
    s.get("chain_length", g.chain_length);
    {
      auto m = s.child("later_mentions");
      m.get("name", g.later_mentions.name);
      m.get("nominal", g.later_mentions.nominal);
      m.get("pronoun", g.later_mentions.pronoun);
      m.finish();
    }
    s.get("extra_mention_rate", g.extra_mention_rate);
    s.get("filler_vocab", g.filler_vocab);
    s.get("trigger_lexicon", g.trigger_lexicon);
    s.get("ambiguous_lexicon", g.ambiguous_lexicon);
    s.get("name_pool", g.name_pool);
    s.get("nominal_lexicon", g.nominal_lexicon);
    std::vector<double> split(std::begin(c.split), std::end(c.split));
    s.get("split", split);
    if (split.size() != 3) throw ConfigError("generator.split", "expected [train, dev, test]");
    std::copy(split.begin(), split.end(), c.split);
    s.finish();
    g.seed = c.seed;
  }
  {
    c.types = c.generator.schema.inventory();
    auto s = top.child("types");
    s.get("event_types", c.types.event_types);
    s.get("entity_types", c.types.entity_types);
    s.get("argument_roles", c.types.argument_roles);
    s.get("k_max", c.types.k_max);
    s.finish();
  }
  {
    auto s = top.child("features");
    std::string kind(to_string(c.features.kind));
    s.get("kind", kind);
    try {
      c.features.kind = feature_kind_from_string(kind);
    } catch (const std::invalid_argument& e) {
      throw ConfigError("features.kind", e.what());
    }
    s.get("seed", c.features.seed);
    s.get("d_tok", c.features.d_tok);
    s.get("buckets", c.features.buckets);
    s.finish();
  }
  {
    auto s = top.child("model");
    s.get("hidden", c.dims.hidden);
    s.get("d_width", c.dims.d_width);
    s.get("max_antecedents", c.dims.max_antecedents);
    s.get("max_tokens", c.train.max_tokens);
    s.finish();
  }
  {
    auto s = top.child("dvn");
    s.get("alpha", c.dvn.alpha);
    s.get("h", c.dvn.h);
    s.get("swap_fraction", c.dvn.swap_fraction);
    s.get("clamp_lo", c.dvn.clamp_lo);
    s.get("clamp_hi", c.dvn.clamp_hi);
    s.get("d_lab", c.dvn.d_lab);
    s.get("hidden", c.dvn.hidden);
    s.finish();
  }
  {
    auto s = top.child("optim");
    s.get("lr", c.train.optim.learning_rate);
    s.get("weight_decay", c.train.optim.weight_decay);
    s.get("beta1", c.train.optim.beta1);
    s.get("beta2", c.train.optim.beta2);
    s.get("epsilon", c.train.optim.epsilon);
    s.get("batch_size", c.train.batch_size);
    s.get("max_epochs", c.train.max_epochs);
    s.get("patience", c.train.patience);
    s.finish();
  }
  top.finish();
  c.train.seed = c.seed;
  c.validate();
  return c;
}

RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("<file>", "cannot open config file " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

std::string RunConfig::to_json() const {
  ordered_json j;
  j["seed"] = seed;
  j["paths"] = {{"corpus_dir", paths.corpus_dir},
                {"checkpoint", paths.checkpoint},
                {"log", paths.log},
                {"predictions", paths.predictions}};
  const auto& g = generator;
  ordered_json gen;
  gen["n_docs"] = g.n_docs;
  gen["sentences_per_doc"] = {g.sentences_per_doc.lo, g.sentences_per_doc.hi};
  gen["tokens_per_sentence"] = {g.tokens_per_sentence.lo, g.tokens_per_sentence.hi};
  gen["event_rate"] = g.event_rate;
  gen["dependency_rate"] = g.dependency_rate;
  gen["event_coref_rate"] = g.event_coref_rate;
  gen["chain_length"] = {g.chain_length.lo, g.chain_length.hi};
  gen["later_mentions"] = {{"name", g.later_mentions.name},
                           {"nominal", g.later_mentions.nominal},
                           {"pronoun", g.later_mentions.pronoun}};
  gen["extra_mention_rate"] = g.extra_mention_rate;
  gen["filler_vocab"] = g.filler_vocab;
  gen["trigger_lexicon"] = g.trigger_lexicon;
  gen["ambiguous_lexicon"] = g.ambiguous_lexicon;
  gen["name_pool"] = g.name_pool;
  gen["nominal_lexicon"] = g.nominal_lexicon;
  gen["split"] = {split[0], split[1], split[2]};
  j["generator"] = gen;
  j["types"] = {{"event_types", types.event_types},
                {"entity_types", types.entity_types},
                {"argument_roles", types.argument_roles},
                {"k_max", types.k_max}};
  j["features"] = {{"kind", std::string(to_string(features.kind))},
                   {"seed", features.seed},
                   {"d_tok", features.d_tok},
                   {"buckets", features.buckets}};
  j["model"] = {{"hidden", dims.hidden},
                {"d_width", dims.d_width},
                {"max_antecedents", dims.max_antecedents},
                {"max_tokens", train.max_tokens}};
  j["dvn"] = {{"alpha", dvn.alpha},         {"h", dvn.h},         {"swap_fraction", dvn.swap_fraction},
              {"clamp_lo", dvn.clamp_lo},   {"clamp_hi", dvn.clamp_hi}, {"d_lab", dvn.d_lab},
              {"hidden", dvn.hidden}};
  j["optim"] = {{"lr", train.optim.learning_rate},
                {"weight_decay", train.optim.weight_decay},
                {"beta1", train.optim.beta1},
                {"beta2", train.optim.beta2},
                {"epsilon", train.optim.epsilon},
                {"batch_size", train.batch_size},
                {"max_epochs", train.max_epochs},
                {"patience", train.patience}};
  return j.dump(2);
}

}  // namespace dvnee
