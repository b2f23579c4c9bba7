#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "sprout/model.hpp"

namespace sprout {

struct AdamWConfig {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-7;
  double weight_decay = 0.004;
};

/// Moments are keyed by canonical parameter name and created on first use.
struct OptimizerState {
  std::uint64_t step = 0;
  double learning_rate = 1e-3;
  std::map<std::string, std::vector<float>> first_moment;
  std::map<std::string, std::vector<float>> second_moment;
};

/**
 * AdamW with decoupled weight decay:
 *   m <- b1 m + (1-b1) g,  v <- b2 v + (1-b2) g^2
 *   p <- p - lr * (m_hat / (sqrt(v_hat) + eps) + wd * p)
 * Decay applies to kernels only; biases and batch-norm gamma/beta are exempt.
 */
class AdamW {
 public:
  explicit AdamW(AdamWConfig config = {});

  /// One update of every trainable parameter of the model from its gradient
  /// buffer. Throws NumericError naming the parameter, before touching any
  /// weight, if a gradient is not finite.
  void step(Model<float>& model);
  void step(std::vector<ParamRef<float>> params);

  double learning_rate() const { return state_.learning_rate; }
  void set_learning_rate(double lr) { state_.learning_rate = lr; }
  const AdamWConfig& config() const { return config_; }
  OptimizerState& state() { return state_; }
  const OptimizerState& state() const { return state_; }

 private:
  AdamWConfig config_;
  OptimizerState state_;
};

/// Scalar-precision reference of one AdamW update; used by tests and by the
/// vectorized path for bias-correction terms.
struct AdamWScalar {
  double param;
  double m;
  double v;
};
AdamWScalar adamw_update(double param, double grad, double m, double v, std::uint64_t step,
                         double lr, const AdamWConfig& config, bool decays);

template <typename T>
struct CceResult {
  double loss = 0.0;
  /// (p - y) / N with respect to the pre-softmax logits.
  Tensor<T> grad_logits;
};

/// Mean categorical cross-entropy with probabilities clamped to >= 1e-12.
/// Throws ValueError if a label row is not one-hot.
template <typename T>
CceResult<T> cce_loss(const Tensor<T>& probabilities, const Tensor<T>& onehot);

/// lambda * sum(w^2) over L2-flagged kernels; when accumulate is set adds
/// 2 * lambda * w to their gradient buffers.
template <typename T>
double l2_penalty(Model<T>& model, double lambda, bool accumulate);

}  // namespace sprout
