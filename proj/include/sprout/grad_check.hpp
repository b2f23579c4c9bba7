#pragma once

#include <cstdint>
#include <string>

#include "sprout/layers.hpp"

namespace sprout {

struct GradCheckOptions {
  double epsilon = 1e-5;
  Mode mode = Mode::inference;
  /// Scalar loss is sum(w * y) with w drawn from this seed. With
  /// weighted == false the plain sum of outputs is used instead.
  bool weighted = true;
  std::uint64_t weight_seed = 7;
  /// Floor applied to the relative-error denominator.
  double denominator_floor = 1e-6;
};

struct GradCheckResult {
  double max_relative_error = 0.0;
  std::string worst_coordinate;  // "input[17]" or "<param>[3]"
  std::size_t coordinates = 0;
};

/**
 * Compares the analytic input and trainable-parameter gradients of a layer
 * against central differences (f(x+e) - f(x-e)) / 2e.
 *
 * The layer must be deterministic across repeated forwards (dropout with a
 * fixed mask, or inference mode). Throws NumericError on non-finite values.
 */
GradCheckResult grad_check(Layer<double>& layer, const Tensor<double>& input,
                           const GradCheckOptions& options = {});

/// Relative error |a - b| / max(|a|, |b|, floor).
double relative_error(double analytic, double numeric, double floor);

}  // namespace sprout
