#include "dvnee/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace dvnee {

namespace {
double relative_error(double analytic, double numeric) {
  return std::abs(analytic - numeric) / std::max(1.0, std::abs(analytic));
}
}  // namespace

double finite_diff_check(const std::function<ValueAndGrad(std::span<const double>)>& f, std::span<const double> x,
                         double eps) {
  if (!(eps > 0.0)) throw std::invalid_argument("finite_diff_check: eps must be positive");
  const auto analytic = f(x).grad;
  if (analytic.size() != x.size()) throw std::invalid_argument("finite_diff_check: gradient length mismatch");
  std::vector<double> probe(x.begin(), x.end());
  double worst = 0.0;
  for (std::size_t i = 0; i < probe.size(); ++i) {
    const double orig = probe[i];
    probe[i] = orig + eps;
    const double up = f(probe).value;
    probe[i] = orig - eps;
    const double down = f(probe).value;
    probe[i] = orig;
    worst = std::max(worst, relative_error(analytic[i], (up - down) / (2.0 * eps)));
  }
  return worst;
}

double finite_diff_check_params(const NamedTensors& params, const NamedTensors& grads,
                                const std::function<double()>& loss, double eps) {
  if (!(eps > 0.0)) throw std::invalid_argument("finite_diff_check_params: eps must be positive");
  if (params.size() != grads.size()) throw std::invalid_argument("finite_diff_check_params: count mismatch");
  double worst = 0.0;
  for (std::size_t t = 0; t < params.size(); ++t) {
    auto w = params[t].second->flat();
    auto g = grads[t].second->flat();
    for (std::size_t i = 0; i < w.size(); ++i) {
      const double orig = w[i];
      w[i] = orig + eps;
      const double up = loss();
      w[i] = orig - eps;
      const double down = loss();
      w[i] = orig;
      worst = std::max(worst, relative_error(g[i], (up - down) / (2.0 * eps)));
    }
  }
  return worst;
}

}  // namespace dvnee
