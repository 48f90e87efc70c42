#include <doctest.h>

#include "dvnee/config.hpp"

using namespace dvnee;

namespace {

std::string field_of(const std::string& text) {
  try {
    parse_config(text);
  } catch (const ConfigError& e) {
    return e.field();
  }
  return "";
}

}  // namespace

TEST_CASE("minimal config takes defaults") {
  const auto c = parse_config(R"({"seed": 9})");
  CHECK(c.seed == 9);
  CHECK(c.generator.seed == 9);
  CHECK(c.train.seed == 9);
  CHECK(c.train.optim.learning_rate == 1e-3);
  CHECK(c.train.optim.weight_decay == 1e-2);
  CHECK(c.train.batch_size == 8);
  CHECK(c.train.max_epochs == 250);
  CHECK(c.train.patience == 15);
  CHECK(c.dvn.h == 20);
  CHECK(c.generator.n_docs == 570);
  CHECK(c.types.event_types == c.generator.schema.inventory().event_types);
}

TEST_CASE("nested sections override defaults") {
  const auto c = parse_config(R"({
    "seed": 1,
    "paths": {"corpus_dir": "corp"},
    "generator": {"n_docs": 20, "tokens_per_sentence": [5, 9], "later_mentions": {"name": 0.5}},
    "features": {"kind": "lookup", "d_tok": 8, "buckets": 64},
    "model": {"hidden": 12, "max_tokens": 50},
    "dvn": {"alpha": 0.1, "h": 3},
    "optim": {"lr": 0.01, "max_epochs": 4}
  })");
  CHECK(c.paths.train() == "corp/train.jsonl");
  CHECK(c.generator.n_docs == 20);
  CHECK(c.generator.tokens_per_sentence.lo == 5);
  CHECK(c.generator.tokens_per_sentence.hi == 9);
  CHECK(c.generator.later_mentions.name == 0.5);
  CHECK(c.features.kind == FeatureKind::Lookup);
  CHECK(c.features.buckets == 64);
  CHECK(c.dims.hidden == 12);
  CHECK(c.train.max_tokens == 50);
  CHECK(c.dvn.alpha == 0.1);
  CHECK(c.dvn.h == 3);
  CHECK(c.train.optim.learning_rate == 0.01);
  CHECK(c.train.max_epochs == 4);
}

TEST_CASE("errors name the offending field") {
  CHECK(field_of(R"({})") == "seed");
  CHECK(field_of(R"({"seed": 1, "colour": 2})") == "colour");
  CHECK(field_of(R"({"seed": 1, "dvn": {"alpah": 2}})") == "dvn.alpah");
  CHECK(field_of(R"({"seed": "x"})") == "seed");
  CHECK(field_of(R"({"seed": 1, "model": {"hidden": 0}})") == "model.hidden");
  CHECK(field_of(R"({"seed": 1, "generator": {"split": [0.5, 0.5]}})") == "generator.split");
  CHECK(field_of(R"({"seed": 1, "generator": {"split": [0.5, 0.4, 0.4]}})") == "generator.split");
  CHECK(field_of(R"({"seed": 1, "features": {"kind": "bert"}})") == "features.kind");
  CHECK(field_of(R"({"seed": 1, "optim": {"beta2": 1.0}})") == "optim.beta2");
  CHECK(field_of("{seed: 1") == "<root>");
  CHECK_FALSE(field_of(R"({"seed": 1, "dvn": {"clamp_lo": 0.7, "clamp_hi": 0.2}})").empty());
}

TEST_CASE("canonical json round-trips") {
  const auto a = parse_config(R"({"seed": 4, "dvn": {"alpha": 0.3}, "generator": {"n_docs": 50}})");
  const auto text = a.to_json();
  const auto b = parse_config(text);
  CHECK(b.to_json() == text);
  CHECK(b.dvn.alpha == 0.3);
  CHECK(b.generator.n_docs == 50);
}

TEST_CASE("missing file") {
  CHECK_THROWS_AS(load_config("/nonexistent/run.json"), ConfigError);
}
