#include "sprout/optim.hpp"

#include <algorithm>
#include <cmath>

namespace sprout {

AdamW::AdamW(AdamWConfig config) : config_(config) {
  if (!(config.learning_rate > 0.0)) throw ValueError("learning rate must be positive");
  state_.learning_rate = config.learning_rate;
}

AdamWScalar adamw_update(double param, double grad, double m, double v, std::uint64_t step,
                         double lr, const AdamWConfig& c, bool decays) {
  m = c.beta1 * m + (1.0 - c.beta1) * grad;
  v = c.beta2 * v + (1.0 - c.beta2) * grad * grad;
  const double t = static_cast<double>(step);
  const double m_hat = m / (1.0 - std::pow(c.beta1, t));
  const double v_hat = v / (1.0 - std::pow(c.beta2, t));
  const double decay = decays ? c.weight_decay * param : 0.0;
  param -= lr * (m_hat / (std::sqrt(v_hat) + c.epsilon) + decay);
  return {param, m, v};
}

void AdamW::step(Model<float>& model) { step(model.trainable_parameters()); }

void AdamW::step(std::vector<ParamRef<float>> params) {
  for (const auto& r : params) {
    const auto g = r.param->value.grad();
    if (g.size() != r.param->value.size()) {
      throw Error("parameter " + r.name + " has no gradient buffer");
    }
    for (float v : g) {
      if (!std::isfinite(v)) throw NumericError("non-finite gradient for parameter " + r.name);
    }
  }
  const std::uint64_t t = ++state_.step;
  const double lr = state_.learning_rate;
  const double b1 = config_.beta1, b2 = config_.beta2;
  const double c1 = 1.0 - std::pow(b1, static_cast<double>(t));
  const double c2 = 1.0 - std::pow(b2, static_cast<double>(t));
  for (const auto& r : params) {
    auto& p = r.param->value;
    const auto g = p.grad();
    auto& m = state_.first_moment[r.name];
    auto& v = state_.second_moment[r.name];
    if (m.size() != p.size()) m.assign(p.size(), 0.0f);
    if (v.size() != p.size()) v.assign(p.size(), 0.0f);
    const double wd = r.param->decays() ? config_.weight_decay : 0.0;
    auto w = p.data();
    for (std::size_t i = 0; i < w.size(); ++i) {
      const double gi = g[i];
      const double mi = b1 * m[i] + (1.0 - b1) * gi;
      const double vi = b2 * v[i] + (1.0 - b2) * gi * gi;
      m[i] = static_cast<float>(mi);
      v[i] = static_cast<float>(vi);
      const double update = (mi / c1) / (std::sqrt(vi / c2) + config_.epsilon) + wd * w[i];
      w[i] = static_cast<float>(w[i] - lr * update);
    }
  }
}

template <typename T>
CceResult<T> cce_loss(const Tensor<T>& probs, const Tensor<T>& onehot) {
  if (probs.shape() != onehot.shape() || probs.rank() != 2) {
    throw DimensionError("cce_loss expects matching [N,K] tensors, got " +
                         shape_str(probs.shape()) + " and " + shape_str(onehot.shape()));
  }
  const std::size_t n = probs.dim(0), k = probs.dim(1);
  CceResult<T> out;
  out.grad_logits = Tensor<T>(probs.shape());
  double total = 0.0;
  for (std::size_t r = 0; r < n; ++r) {
    std::size_t ones = 0, label = 0;
    for (std::size_t j = 0; j < k; ++j) {
      const T y = onehot[r * k + j];
      if (y == T(1)) {
        ++ones;
        label = j;
      } else if (y != T(0)) {
        ones = 2;
      }
    }
    if (ones != 1) throw ValueError("label row " + std::to_string(r) + " is not one-hot");
    total += -std::log(std::max(static_cast<double>(probs[r * k + label]), 1e-12));
    for (std::size_t j = 0; j < k; ++j) {
      out.grad_logits[r * k + j] =
          static_cast<T>((static_cast<double>(probs[r * k + j]) - onehot[r * k + j]) / n);
    }
  }
  out.loss = total / static_cast<double>(n);
  return out;
}

template <typename T>
double l2_penalty(Model<T>& model, double lambda, bool accumulate) {
  if (lambda < 0.0) throw ValueError("L2 strength must be non-negative");
  double penalty = 0.0;
  for (auto& r : model.parameters()) {
    if (!r.param->l2) continue;
    const auto w = r.param->value.data();
    double sq = 0.0;
    for (T v : w) sq += static_cast<double>(v) * v;
    penalty += lambda * sq;
    if (accumulate && lambda != 0.0 && r.param->value.has_grad()) {
      auto g = r.param->value.grad();
      for (std::size_t i = 0; i < w.size(); ++i) g[i] += static_cast<T>(2.0 * lambda * w[i]);
    }
  }
  return penalty;
}

template CceResult<float> cce_loss(const Tensor<float>&, const Tensor<float>&);
template CceResult<double> cce_loss(const Tensor<double>&, const Tensor<double>&);
template double l2_penalty(Model<float>&, double, bool);
template double l2_penalty(Model<double>&, double, bool);

}  // namespace sprout
