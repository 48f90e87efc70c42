#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

#include "dvnee/doc_model.hpp"
#include "dvnee/dvn.hpp"
#include "dvnee/features.hpp"
#include "dvnee/local_model.hpp"
#include "dvnee/pipeline.hpp"
#include "dvnee/synth.hpp"

namespace dvnee {

/// Bad or missing configuration value; `field()` is the dotted path.
class ConfigError : public std::invalid_argument {
 public:
  ConfigError(const std::string& field, const std::string& what);
  const std::string& field() const { return field_; }

 private:
  std::string field_;
};

struct Paths {
  std::string corpus_dir = "data";  // holds train.jsonl, dev.jsonl, test.jsonl
  std::string checkpoint = "model.ckpt";
  std::string log = "train.jsonl";
  std::string predictions = "predictions.jsonl";

  std::string train() const { return corpus_dir + "/train.jsonl"; }
  std::string dev() const { return corpus_dir + "/dev.jsonl"; }
  std::string test() const { return corpus_dir + "/test.jsonl"; }
};

/// One file drives generation, training and inference.
struct RunConfig {
  std::uint64_t seed = 0;
  Paths paths;
  synth::GenConfig generator;
  double split[3] = {500.0 / 570.0, 30.0 / 570.0, 40.0 / 570.0};  // train, dev, test
  TypeInventory types;
  FeatureConfig features;
  LocalDims dims;
  DvnConfig dvn;
  TrainConfig train;

  /// Throws ConfigError naming the first offending field.
  void validate() const;
  /// Canonical JSON with every field present.
  std::string to_json() const;
};

/// Defaults everywhere except the required top-level `seed`. Unknown keys
/// are rejected. The inventory defaults to the generator schema's.
RunConfig parse_config(const std::string& text);
RunConfig load_config(const std::string& path);

}  // namespace dvnee
