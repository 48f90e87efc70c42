#pragma once

#include <cstdint>
#include <functional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "dvnee/doc_model.hpp"
#include "dvnee/dvn.hpp"
#include "dvnee/features.hpp"
#include "dvnee/local_model.hpp"
#include "dvnee/metrics.hpp"
#include "dvnee/optim.hpp"

namespace dvnee {

enum class TrainMode : std::uint8_t { Base, Dvn, DvnRn, DvnSn, DvnSnlc };

/// "base", "dvn", "dvn+rn", "dvn+sn", "dvn+snlc".
std::string_view to_string(TrainMode m);
TrainMode train_mode_from_string(std::string_view s);
NoiseMode noise_of(TrainMode m);

/// Everything inference needs: inventory, features, the local extractor and
/// the value network.
struct Model {
  TypeInventory types;
  FeatureProvider features;
  LocalDims dims;
  LocalModelParams local;
  DvnConfig dvn;
  ValueNetParams value;
  bool use_dvn = false;  // refine trigger distributions at inference

  /// Local and value parameters are drawn from separate streams, so the
  /// local initialisation does not depend on the value-net shape.
  static Model create(const TypeInventory& types, const FeatureConfig& features, const LocalDims& dims,
                      const DvnConfig& dvn, std::uint64_t seed);

  /// "features.table" (lookup features only), "local.*", "value.*".
  NamedTensors parameters();
};

struct TrainConfig {
  std::size_t batch_size = 8;
  std::size_t max_epochs = 250;
  std::size_t patience = 15;
  std::size_t max_tokens = 128;  // chunk size
  OptimConfig optim;
  std::uint64_t seed = 0;

  void validate() const;
};

/// Training examples for every chunk of every document, in corpus order.
std::vector<ChunkExample> make_examples(const Model& model, const std::vector<Document>& docs,
                                        std::size_t max_tokens);

struct StepStats {
  double local_loss = 0.0;  // summed over the batch
  double dvn_loss = 0.0;    // summed over value-net samples
  std::size_t dvn_samples = 0;
};

/// One optimizer over every model parameter. Each step runs the local
/// losses and, outside base mode, the value-net loss on the local trigger
/// distribution (held constant) and on its noised copy when the mode adds
/// noise. Gradients are averaged over the batch in batch order.
class Trainer {
 public:
  Trainer(Model& model, TrainMode mode, const TrainConfig& cfg);
  StepStats step(std::span<const ChunkExample* const> batch);

 private:
  struct Grads {
    Tensor2 table;
    LocalModelParams local;
    ValueNetParams value;
  };

  Model& model_;
  TrainMode mode_;
  NamedTensors params_;
  Grads grads_;
  NamedTensors grad_list_;
  OptimState opt_;
  std::mt19937_64 noise_rng_;
};

struct EpochLog {
  std::size_t epoch = 0;
  std::size_t steps = 0;
  double local_loss = 0.0;  // mean over chunks
  double dvn_loss = 0.0;    // mean over value-net samples
  Prf dev_trigger, dev_argument;
  bool improved = false;

  std::string to_json() const;
};

struct TrainResult {
  std::vector<EpochLog> epochs;
  std::vector<double> dvn_step_loss;  // mean value-net loss per optimizer step
  std::size_t best_epoch = 0;
  double best_dev_trigger_f1 = -1.0;
};

using EpochCallback = std::function<void(const EpochLog&)>;

/// End-to-end training with early stopping on dev DocTrigger F1. The model
/// is left holding the parameters of the best epoch. Throws NumericError
/// carrying the epoch and step on a non-finite loss.
TrainResult train(Model& model, TrainMode mode, const std::vector<Document>& train_docs,
                  const std::vector<Document>& dev_docs, const TrainConfig& cfg, const EpochCallback& on_epoch = {});

/// Per-token trigger distribution for a whole document, refined chunk by
/// chunk when the model uses the value network and h > 0.
Tensor2 document_trigger_dist(const Model& model, const Document& doc, std::size_t max_tokens);

/// Full predicted annotations; the result passes normalize_and_validate.
Annotations infer_document(const Model& model, const Document& doc, std::size_t max_tokens);

/// Documents with `gold` replaced by predictions, in input order.
std::vector<Document> infer_corpus(const Model& model, const std::vector<Document>& docs, std::size_t max_tokens);

}  // namespace dvnee
