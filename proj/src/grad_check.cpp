#include "sprout/grad_check.hpp"

#include <algorithm>
#include <cmath>

namespace sprout {

double relative_error(double analytic, double numeric, double floor) {
  const double denom = std::max({std::abs(analytic), std::abs(numeric), floor});
  return std::abs(analytic - numeric) / denom;
}

namespace {

double weighted_loss(const Tensor<double>& y, const std::vector<double>& w) {
  if (!y.all_finite()) throw NumericError("grad_check: forward produced non-finite values");
  double s = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) s += w[i] * y[i];
  return s;
}

}  // namespace

GradCheckResult grad_check(Layer<double>& layer, const Tensor<double>& input,
                           const GradCheckOptions& options) {
  if (!input.all_finite()) throw NumericError("grad_check: input has non-finite values");
  const double eps = options.epsilon;

  Tensor<double> y = layer.forward(input, options.mode, true);
  std::vector<double> w(y.size(), 1.0);
  if (options.weighted) {
    Rng rng(options.weight_seed);
    for (auto& v : w) v = rng.uniform(-1.0, 1.0);
  }
  layer.zero_grad();
  const Tensor<double> dy(y.shape(), w);
  const Tensor<double> dx = layer.backward(dy, true);
  if (!dx.all_finite()) throw NumericError("grad_check: backward produced non-finite values");

  GradCheckResult result;
  auto record = [&](double analytic, double numeric, const std::string& where) {
    const double err = relative_error(analytic, numeric, options.denominator_floor);
    ++result.coordinates;
    if (err > result.max_relative_error || result.worst_coordinate.empty()) {
      result.max_relative_error = std::max(result.max_relative_error, err);
      result.worst_coordinate = where;
    }
  };

  Tensor<double> probe = input;
  for (std::size_t i = 0; i < probe.size(); ++i) {
    const double saved = probe[i];
    probe[i] = saved + eps;
    const double up = weighted_loss(layer.forward(probe, options.mode, false), w);
    probe[i] = saved - eps;
    const double down = weighted_loss(layer.forward(probe, options.mode, false), w);
    probe[i] = saved;
    record(dx[i], (up - down) / (2.0 * eps), "input[" + std::to_string(i) + "]");
  }

  for (auto& p : layer.params()) {
    if (!p.value.has_grad()) continue;
    const std::vector<double> analytic(p.value.grad().begin(), p.value.grad().end());
    if (std::any_of(analytic.begin(), analytic.end(), [](double v) { return !std::isfinite(v); })) {
      throw NumericError("grad_check: non-finite gradient for " + p.name);
    }
    for (std::size_t i = 0; i < p.value.size(); ++i) {
      const double saved = p.value[i];
      p.value[i] = saved + eps;
      const double up = weighted_loss(layer.forward(input, options.mode, false), w);
      p.value[i] = saved - eps;
      const double down = weighted_loss(layer.forward(input, options.mode, false), w);
      p.value[i] = saved;
      record(analytic[i], (up - down) / (2.0 * eps), p.name + "[" + std::to_string(i) + "]");
    }
  }
  return result;
}

}  // namespace sprout
