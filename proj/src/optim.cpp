#include "dvnee/optim.hpp"

#include <cmath>

namespace dvnee {

void optim_step(OptimState& state, const NamedTensors& params, const NamedTensors& grads) {
  if (params.size() != grads.size()) throw ShapeError("optim_step: parameter and gradient counts differ");
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (!params[i].second->same_shape(*grads[i].second)) {
      throw ShapeError("optim_step: gradient for '" + params[i].first + "' has shape " +
                       shape_string(*grads[i].second) + ", parameter " + shape_string(*params[i].second));
    }
    grads[i].second->require_finite("gradient of " + params[i].first);
  }
  if (state.names.empty()) {
    for (const auto& [name, t] : params) {
      state.names.push_back(name);
      state.first_moment.emplace_back(t->rows(), t->cols());
      state.second_moment.emplace_back(t->rows(), t->cols());
    }
  } else {
    if (state.names.size() != params.size()) throw ShapeError("optim_step: parameter set changed between steps");
    for (std::size_t i = 0; i < params.size(); ++i) {
      if (state.names[i] != params[i].first || !state.first_moment[i].same_shape(*params[i].second)) {
        throw ShapeError("optim_step: state does not match parameter '" + params[i].first + "'");
      }
    }
  }

  const auto& c = state.config;
  ++state.step;
  const double t = static_cast<double>(state.step);
  const double correction1 = 1.0 - std::pow(c.beta1, t);
  const double correction2 = 1.0 - std::pow(c.beta2, t);
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto w = params[i].second->flat();
    auto g = grads[i].second->flat();
    auto m = state.first_moment[i].flat();
    auto v = state.second_moment[i].flat();
    for (std::size_t j = 0; j < w.size(); ++j) {
      m[j] = c.beta1 * m[j] + (1.0 - c.beta1) * g[j];
      v[j] = c.beta2 * v[j] + (1.0 - c.beta2) * g[j] * g[j];
      const double mhat = m[j] / correction1;
      const double vhat = v[j] / correction2;
      w[j] -= c.learning_rate * (mhat / (std::sqrt(vhat) + c.epsilon) + c.weight_decay * w[j]);
    }
  }
}

}  // namespace dvnee
