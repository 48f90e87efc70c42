#pragma once

#include <iosfwd>
#include <string>

#include "dvnee/config.hpp"
#include "dvnee/pipeline.hpp"

namespace dvnee::cli {

inline constexpr int kOk = 0;
inline constexpr int kUsage = 1;    // bad flags or configuration
inline constexpr int kData = 2;     // unreadable or invalid corpus, checkpoint or predictions
inline constexpr int kNumeric = 3;  // non-finite loss or gradient

/// generate | train | infer | score | bench. Diagnostics go to `err`,
/// machine-readable results to `out` (or the file named by --out).
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

/// Checkpoint metadata: {"mode": ..., "config": {...}}.
void save_model(const std::string& path, Model& model, TrainMode mode, const RunConfig& cfg);

struct LoadedModel {
  RunConfig config;
  TrainMode mode = TrainMode::Base;
  Model model;
};
LoadedModel load_model(const std::string& path);

}  // namespace dvnee::cli
