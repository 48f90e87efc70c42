#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "dvnee/mlp.hpp"

namespace dvnee {

struct OptimConfig {
  double learning_rate = 1e-3;
  double weight_decay = 1e-2;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

/// Adaptive-moment optimizer state with decoupled weight decay. Moments are
/// keyed by parameter name and allocated on the first step.
struct OptimState {
  OptimConfig config;
  std::uint64_t step = 0;
  std::vector<std::string> names;
  std::vector<Tensor2> first_moment;
  std::vector<Tensor2> second_moment;
};

/// One update of every tensor in `params` using the matching entry of
/// `grads`. Throws NumericError naming the tensor on a non-finite gradient,
/// before anything is modified.
void optim_step(OptimState& state, const NamedTensors& params, const NamedTensors& grads);

}  // namespace dvnee
