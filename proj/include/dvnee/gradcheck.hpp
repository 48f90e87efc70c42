#pragma once

#include <functional>
#include <span>
#include <vector>

#include "dvnee/mlp.hpp"

namespace dvnee {

struct ValueAndGrad {
  double value = 0.0;
  std::vector<double> grad;
};

/// Max over coordinates of |analytic - central difference| / max(1, |analytic|).
/// `f` returns its value and analytic gradient at a point. Throws
/// std::invalid_argument when eps <= 0.
double finite_diff_check(const std::function<ValueAndGrad(std::span<const double>)>& f, std::span<const double> x,
                         double eps);

/// Same measure over every entry of a set of parameter tensors: `loss` is
/// re-evaluated after perturbing each entry in place, and compared to the
/// matching entry of `grads`.
double finite_diff_check_params(const NamedTensors& params, const NamedTensors& grads,
                                const std::function<double()>& loss, double eps);

}  // namespace dvnee
