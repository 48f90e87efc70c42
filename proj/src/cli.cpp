#include "dvnee/cli.hpp"

#include <algorithm>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "dvnee/checkpoint.hpp"
#include "dvnee/synth.hpp"

namespace dvnee::cli {

using nlohmann::json;
using nlohmann::ordered_json;

void save_model(const std::string& path, Model& model, TrainMode mode, const RunConfig& cfg) {
  ordered_json meta;
  meta["mode"] = std::string(to_string(mode));
  meta["config"] = ordered_json::parse(cfg.to_json());
  write_checkpoint(path, meta.dump(), model.parameters());
}

LoadedModel load_model(const std::string& path) {
  const Checkpoint ck = read_checkpoint(path);
  json meta;
  try {
    meta = json::parse(ck.metadata);
  } catch (const json::exception& e) {
    throw CheckpointError("checkpoint metadata is not JSON: " + std::string(e.what()));
  }
  if (!meta.contains("mode") || !meta.contains("config")) throw CheckpointError("checkpoint metadata lacks mode/config");
  RunConfig c = parse_config(meta["config"].dump());
  const TrainMode mode = train_mode_from_string(meta["mode"].get<std::string>());
  Model model = Model::create(c.types, c.features, c.dims, c.dvn, c.seed);
  LoadedModel out{std::move(c), mode, std::move(model)};
  load_tensors(ck, out.model.parameters());
  out.model.use_dvn = out.mode != TrainMode::Base;
  out.model.dvn.noise = noise_of(out.mode);
  return out;
}

namespace {

// Writes to --out when given, else to the command's output stream.
class Sink {
 public:
  Sink(const std::string& path, std::ostream& fallback) : os_(&fallback) {
    if (path.empty()) return;
    file_.open(path, std::ios::binary);
    if (!file_) throw std::runtime_error("cannot write '" + path + "'");
    os_ = &file_;
  }
  std::ostream& operator*() { return *os_; }

 private:
  std::ofstream file_;
  std::ostream* os_;
};

void ensure_parent(const std::string& path) {
  const auto parent = std::filesystem::path(path).parent_path();
  if (!parent.empty()) std::filesystem::create_directories(parent);
}

RunConfig config_with_seed(const std::string& path, const std::optional<std::uint64_t>& seed) {
  RunConfig c = load_config(path);
  if (seed) {
    c.seed = *seed;
    c.generator.seed = *seed;
    c.train.seed = *seed;
  }
  return c;
}

std::vector<Document> read_checked(const std::string& path, const TypeInventory& types) {
  auto docs = read_corpus(path);
  for (const auto& d : docs) {
    validate(d);
    validate_against(d, types);
  }
  return docs;
}

int cmd_generate(const RunConfig& c, const std::string& out_dir, std::ostream& out) {
  const std::string dir = out_dir.empty() ? c.paths.corpus_dir : out_dir;
  std::filesystem::create_directories(dir);
  const auto corpus = synth::generate(c.generator);
  const auto parts = synth::split(corpus, c.split, c.seed);
  write_corpus(dir + "/train.jsonl", parts.train);
  write_corpus(dir + "/dev.jsonl", parts.dev);
  write_corpus(dir + "/test.jsonl", parts.test);
  ordered_json j;
  j["dir"] = dir;
  j["train"] = parts.train.size();
  j["dev"] = parts.dev.size();
  j["test"] = parts.test.size();
  out << j.dump() << '\n';
  return kOk;
}

int cmd_train(const RunConfig& c, TrainMode mode, const std::string& checkpoint, const std::string& log_path,
              std::ostream& out) {
  const auto train_docs = read_checked(c.paths.train(), c.types);
  const auto dev_docs = read_checked(c.paths.dev(), c.types);
  Model model = Model::create(c.types, c.features, c.dims, c.dvn, c.seed);
  const std::string log_file = log_path.empty() ? c.paths.log : log_path;
  ensure_parent(log_file);
  std::ofstream log(log_file, std::ios::binary);
  if (!log) throw std::runtime_error("cannot write log '" + log_file + "'");
  const auto result = train(model, mode, train_docs, dev_docs, c.train, [&](const EpochLog& e) {
    log << e.to_json() << '\n';
    log.flush();
  });
  const std::string ck = checkpoint.empty() ? c.paths.checkpoint : checkpoint;
  ensure_parent(ck);
  save_model(ck, model, mode, c);
  ordered_json j;
  j["mode"] = std::string(to_string(mode));
  j["epochs"] = result.epochs.size();
  j["best_epoch"] = result.best_epoch;
  j["best_dev_doc_trigger_f1"] = result.best_dev_trigger_f1;
  j["checkpoint"] = ck;
  out << j.dump() << '\n';
  return kOk;
}

int cmd_infer(const std::string& checkpoint, const std::string& input, const std::optional<std::size_t>& h,
              const std::string& out_path, std::ostream& out) {
  auto loaded = load_model(checkpoint);
  if (h) loaded.model.dvn.h = *h;
  const auto docs = read_checked(input, loaded.model.types);
  const auto pred = infer_corpus(loaded.model, docs, loaded.config.train.max_tokens);
  Sink sink(out_path, out);
  for (const auto& d : pred) *sink << serialize_document(d) << '\n';
  return kOk;
}

int cmd_score(const std::string& gold_path, const std::string& pred_path, const std::string& out_path,
              std::ostream& out) {
  const auto gold = read_corpus(gold_path);
  const auto pred = read_corpus(pred_path);
  for (const auto* set : {&gold, &pred})
    for (const auto& d : *set) validate(d);
  const auto report = score_corpus(gold, pred);
  Sink sink(out_path, out);
  *sink << report.to_json() << '\n';
  return kOk;
}

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

template <class F>
double seconds(F&& f) {
  const auto t0 = std::chrono::steady_clock::now();
  f();
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

int cmd_bench(const std::string& checkpoint, const std::string& corpus, std::size_t repeats,
              const std::optional<std::size_t>& h, const std::string& out_path, std::ostream& out) {
  if (repeats == 0) throw ConfigError("--repeats", "must be >= 1");
  const auto loaded = load_model(checkpoint);
  const auto docs = read_checked(corpus, loaded.model.types);
  if (docs.empty()) throw std::runtime_error("bench corpus '" + corpus + "' is empty");
  const std::size_t max_tokens = loaded.config.train.max_tokens;

  Model base = loaded.model;
  base.use_dvn = false;
  Model dvn = loaded.model;
  dvn.use_dvn = true;
  if (h) dvn.dvn.h = *h;

  // Training: seconds per optimizer step on one multi-sentence chunk.
  const auto examples = make_examples(base, docs, max_tokens);
  const std::size_t n_steps = std::min<std::size_t>(examples.size(), 32);
  Model base_train = base, dvn_train = dvn;
  Trainer base_trainer(base_train, TrainMode::Base, loaded.config.train);
  Trainer dvn_trainer(dvn_train, TrainMode::Dvn, loaded.config.train);
  auto run_steps = [&](Trainer& t) {
    for (std::size_t i = 0; i < n_steps; ++i) {
      const ChunkExample* one = &examples[i];
      t.step(std::span<const ChunkExample* const>(&one, 1));
    }
  };
  auto run_infer = [&](const Model& m) {
    for (const auto& d : docs) (void)infer_document(m, d, max_tokens);
  };
  // Warm-up, excluded from the timings.
  run_steps(base_trainer);
  run_steps(dvn_trainer);
  run_infer(base);
  run_infer(dvn);

  std::vector<double> tb, td, ib, id;
  for (std::size_t r = 0; r < repeats; ++r) {
    tb.push_back(seconds([&] { run_steps(base_trainer); }) / static_cast<double>(n_steps));
    td.push_back(seconds([&] { run_steps(dvn_trainer); }) / static_cast<double>(n_steps));
    ib.push_back(seconds([&] { run_infer(base); }) / static_cast<double>(docs.size()));
    id.push_back(seconds([&] { run_infer(dvn); }) / static_cast<double>(docs.size()));
  }
  ordered_json j;
  j["repeats"] = repeats;
  j["documents"] = docs.size();
  j["h"] = dvn.dvn.h;
  j["train_step_seconds"] = {{"base", median(tb)}, {"dvn", median(td)}};
  j["infer_doc_seconds"] = {{"base", median(ib)}, {"dvn", median(id)}};
  j["train_ratio"] = median(td) / median(tb);
  j["infer_ratio"] = median(id) / median(ib);
  Sink sink(out_path, out);
  *sink << j.dump() << '\n';
  return kOk;
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Document-level event extraction with a deep value network"};
  app.set_help_flag("--help", "print this help and exit");
  app.require_subcommand(1);
  std::string config, mode = "base", checkpoint, out_path, input, gold, pred;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> h;
  std::size_t repeats = 5;

  auto* gen = app.add_subcommand("generate", "write train/dev/test corpora");
  gen->add_option("--config", config, "run configuration (JSON)")->required();
  gen->add_option("--seed", seed, "override the configured seed");
  gen->add_option("--out", out_path, "output directory (default: paths.corpus_dir)");

  auto* tr = app.add_subcommand("train", "train a model and write a checkpoint");
  tr->add_option("--config", config, "run configuration (JSON)")->required();
  tr->add_option("--mode", mode, "base, dvn, dvn+rn, dvn+sn or dvn+snlc");
  tr->add_option("--seed", seed, "override the configured seed");
  tr->add_option("--checkpoint", checkpoint, "checkpoint path (default: paths.checkpoint)");
  tr->add_option("--out", out_path, "training log path (default: paths.log)");

  auto* inf = app.add_subcommand("infer", "predict annotations for a corpus");
  inf->add_option("--checkpoint", checkpoint, "trained checkpoint")->required();
  inf->add_option("input", input, "input corpus")->required();
  inf->add_option("--h", h, "override the number of refinement steps");
  inf->add_option("--out", out_path, "predictions file (default: stdout)");

  auto* sc = app.add_subcommand("score", "score predictions against gold");
  sc->add_option("gold", gold, "gold corpus")->required();
  sc->add_option("pred", pred, "predicted corpus")->required();
  sc->add_option("--out", out_path, "report file (default: stdout)");

  auto* be = app.add_subcommand("bench", "time training steps and inference, base against DVN");
  be->add_option("--checkpoint", checkpoint, "trained checkpoint")->required();
  be->add_option("corpus", input, "corpus to time on")->required();
  be->add_option("--repeats", repeats, "timed repetitions (median reported)");
  be->add_option("--h", h, "override the number of refinement steps");
  be->add_option("--out", out_path, "report file (default: stdout)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    app.exit(e, out, err);
    return kUsage;
  }

  try {
    if (*gen) return cmd_generate(config_with_seed(config, seed), out_path, out);
    if (*tr) {
      const TrainMode m = [&] {
        try {
          return train_mode_from_string(mode);
        } catch (const std::invalid_argument& e) {
          throw ConfigError("--mode", e.what());
        }
      }();
      return cmd_train(config_with_seed(config, seed), m, checkpoint, out_path, out);
    }
    if (*inf) return cmd_infer(checkpoint, input, h, out_path, out);
    if (*sc) return cmd_score(gold, pred, out_path, out);
    if (*be) return cmd_bench(checkpoint, input, repeats, h, out_path, out);
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << '\n';
    return kUsage;
  } catch (const NumericError& e) {
    err << "numeric error: " << e.what() << '\n';
    return kNumeric;
  } catch (const ParseError& e) {
    err << "parse error: line " << e.line() << ": " << e.what() << '\n';
    return kData;
  } catch (const ValidationError& e) {
    err << "validation error [" << e.rule() << "]: " << e.what() << '\n';
    return kData;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kData;
  }
  return kUsage;
}

}  // namespace dvnee::cli
