#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

#include "sprout/kernels.hpp"
#include "sprout/rng.hpp"
#include "sprout/tensor.hpp"

namespace sprout {

enum class LayerKind {
  input,
  zeropad,
  conv,
  depthwise_conv,
  batchnorm,
  activation,
  global_avg_pool,
  dense,
  dropout
};

std::string_view to_string(LayerKind kind);

enum class ParamRole { kernel, bias, gamma, beta, moving_mean, moving_var };

std::string_view to_string(ParamRole role);

/// A named layer tensor. Moving statistics are never learnable.
template <typename T>
struct Parameter {
  std::string name;
  ParamRole role;
  Tensor<T> value;
  bool l2 = false;

  bool learnable() const { return role != ParamRole::moving_mean && role != ParamRole::moving_var; }
  /// Decoupled weight decay touches kernels only.
  bool decays() const { return role == ParamRole::kernel; }
};

/**
 * One entry of the sequential graph.
 *
 * forward() caches what backward() needs only when keep_cache is set, so
 * layers below the lowest trainable layer cost no extra memory. backward()
 * accumulates parameter gradients into Parameter::value.grad() for learnable,
 * unfrozen parameters and returns the input gradient when asked for it.
 */
template <typename T>
class Layer {
 public:
  explicit Layer(std::string name) : name_(std::move(name)) {}
  virtual ~Layer() = default;

  virtual LayerKind kind() const = 0;
  /// Human-readable hyperparameters for the enumeration table.
  virtual std::string hyper() const = 0;
  /// Per-example output shape (no batch axis).
  virtual Shape output_shape(const Shape& input) const = 0;
  virtual Tensor<T> forward(const Tensor<T>& x, Mode mode, bool keep_cache) = 0;
  virtual Tensor<T> backward(const Tensor<T>& dy, bool need_input_grad) = 0;
  virtual std::unique_ptr<Layer> clone() const = 0;
  virtual void initialize(Rng&) {}
  virtual void clear_cache() {}

  /// True for layers whose output is a softmax; backward_logits() then
  /// accepts the gradient with respect to the pre-softmax values.
  virtual bool outputs_softmax() const { return false; }
  virtual Tensor<T> backward_logits(const Tensor<T>& dlogits, bool need_input_grad);

  const std::string& name() const { return name_; }
  std::vector<Parameter<T>>& params() { return params_; }
  const std::vector<Parameter<T>>& params() const { return params_; }
  Parameter<T>& param(std::string_view name);
  const Parameter<T>& param(std::string_view name) const;
  bool has_learnable_params() const;

  bool frozen() const { return frozen_; }
  void set_frozen(bool frozen);
  /// Learnable and not frozen.
  bool trainable() const { return has_learnable_params() && !frozen_; }
  void zero_grad();

 protected:
  Parameter<T>& add_param(std::string name, ParamRole role, Shape shape, T fill = T(0));
  void accumulate_grad(Parameter<T>& p, const Tensor<T>& g);

  std::string name_;
  std::vector<Parameter<T>> params_;
  bool frozen_ = false;
};

template <typename T>
class InputLayer final : public Layer<T> {
 public:
  InputLayer(std::string name, Shape shape);
  LayerKind kind() const override { return LayerKind::input; }
  std::string hyper() const override;
  Shape output_shape(const Shape& input) const override;
  Tensor<T> forward(const Tensor<T>& x, Mode mode, bool keep_cache) override;
  Tensor<T> backward(const Tensor<T>& dy, bool need_input_grad) override;
  std::unique_ptr<Layer<T>> clone() const override;

 private:
  Shape shape_;
};

template <typename T>
class ZeroPad2D final : public Layer<T> {
 public:
  ZeroPad2D(std::string name, Padding pad);
  LayerKind kind() const override { return LayerKind::zeropad; }
  std::string hyper() const override;
  Shape output_shape(const Shape& input) const override;
  Tensor<T> forward(const Tensor<T>& x, Mode mode, bool keep_cache) override;
  Tensor<T> backward(const Tensor<T>& dy, bool need_input_grad) override;
  std::unique_ptr<Layer<T>> clone() const override;

 private:
  Padding pad_;
};

/// Bias-free 2-D convolution, kernel [kh, kw, C, F].
template <typename T>
class Conv2D final : public Layer<T> {
 public:
  Conv2D(std::string name, std::size_t kernel_size, std::size_t in_channels,
         std::size_t filters, std::size_t stride, Padding pad = {});
  LayerKind kind() const override { return LayerKind::conv; }
  std::string hyper() const override;
  Shape output_shape(const Shape& input) const override;
  Tensor<T> forward(const Tensor<T>& x, Mode mode, bool keep_cache) override;
  Tensor<T> backward(const Tensor<T>& dy, bool need_input_grad) override;
  std::unique_ptr<Layer<T>> clone() const override;
  void initialize(Rng& rng) override;
  void clear_cache() override { input_ = {}; }

 private:
  std::size_t stride_;
  Padding pad_;
  Tensor<T> input_;
};

/// Depthwise 2-D convolution, kernel [kh, kw, C] (depth multiplier 1).
template <typename T>
class DepthwiseConv2D final : public Layer<T> {
 public:
  DepthwiseConv2D(std::string name, std::size_t kernel_size, std::size_t channels,
                  std::size_t stride, Padding pad = {});
  LayerKind kind() const override { return LayerKind::depthwise_conv; }
  std::string hyper() const override;
  Shape output_shape(const Shape& input) const override;
  Tensor<T> forward(const Tensor<T>& x, Mode mode, bool keep_cache) override;
  Tensor<T> backward(const Tensor<T>& dy, bool need_input_grad) override;
  std::unique_ptr<Layer<T>> clone() const override;
  void initialize(Rng& rng) override;
  void clear_cache() override { input_ = {}; }

 private:
  std::size_t stride_;
  Padding pad_;
  Tensor<T> input_;
};

/// Frozen instances always normalize with their moving statistics.
template <typename T>
class BatchNorm final : public Layer<T> {
 public:
  BatchNorm(std::string name, std::size_t channels, double momentum = 0.99,
            double epsilon = 1e-3);
  LayerKind kind() const override { return LayerKind::batchnorm; }
  std::string hyper() const override;
  Shape output_shape(const Shape& input) const override;
  Tensor<T> forward(const Tensor<T>& x, Mode mode, bool keep_cache) override;
  Tensor<T> backward(const Tensor<T>& dy, bool need_input_grad) override;
  std::unique_ptr<Layer<T>> clone() const override;
  void clear_cache() override { cache_ = {}; }

  double momentum() const { return momentum_; }
  double epsilon() const { return epsilon_; }

 private:
  double momentum_;
  double epsilon_;
  BatchNormCache<T> cache_;
};

template <typename T>
class ActivationLayer final : public Layer<T> {
 public:
  ActivationLayer(std::string name, Activation kind);
  LayerKind kind() const override { return LayerKind::activation; }
  std::string hyper() const override;
  Shape output_shape(const Shape& input) const override { return input; }
  Tensor<T> forward(const Tensor<T>& x, Mode mode, bool keep_cache) override;
  Tensor<T> backward(const Tensor<T>& dy, bool need_input_grad) override;
  std::unique_ptr<Layer<T>> clone() const override;
  void clear_cache() override { output_ = {}; }
  bool outputs_softmax() const override { return activation_ == Activation::softmax; }
  Tensor<T> backward_logits(const Tensor<T>& dlogits, bool need_input_grad) override;

  Activation activation() const { return activation_; }

 private:
  Activation activation_;
  Tensor<T> output_;
};

template <typename T>
class GlobalAvgPool final : public Layer<T> {
 public:
  explicit GlobalAvgPool(std::string name) : Layer<T>(std::move(name)) {}
  LayerKind kind() const override { return LayerKind::global_avg_pool; }
  std::string hyper() const override { return ""; }
  Shape output_shape(const Shape& input) const override;
  Tensor<T> forward(const Tensor<T>& x, Mode mode, bool keep_cache) override;
  Tensor<T> backward(const Tensor<T>& dy, bool need_input_grad) override;
  std::unique_ptr<Layer<T>> clone() const override;

 private:
  Shape input_shape_;
};

/// Fully connected layer with a fused output activation.
template <typename T>
class Dense final : public Layer<T> {
 public:
  Dense(std::string name, std::size_t in_features, std::size_t units,
        Activation activation = Activation::linear, bool l2_regularized = false);
  LayerKind kind() const override { return LayerKind::dense; }
  std::string hyper() const override;
  Shape output_shape(const Shape& input) const override;
  Tensor<T> forward(const Tensor<T>& x, Mode mode, bool keep_cache) override;
  Tensor<T> backward(const Tensor<T>& dy, bool need_input_grad) override;
  std::unique_ptr<Layer<T>> clone() const override;
  void initialize(Rng& rng) override;
  void clear_cache() override { input_ = {}; output_ = {}; }
  bool outputs_softmax() const override { return activation_ == Activation::softmax; }
  Tensor<T> backward_logits(const Tensor<T>& dlogits, bool need_input_grad) override;

  Activation activation() const { return activation_; }
  std::size_t units() const { return units_; }

 private:
  std::size_t units_;
  Activation activation_;
  Tensor<T> input_;
  Tensor<T> output_;
};

/**
 * Inverted dropout driven by a layer-owned generator. With a fixed mask the
 * train-mode forward reuses the previous mask, which keeps finite-difference
 * checks deterministic.
 */
template <typename T>
class Dropout final : public Layer<T> {
 public:
  Dropout(std::string name, double rate, std::uint64_t seed);
  LayerKind kind() const override { return LayerKind::dropout; }
  std::string hyper() const override;
  Shape output_shape(const Shape& input) const override { return input; }
  Tensor<T> forward(const Tensor<T>& x, Mode mode, bool keep_cache) override;
  Tensor<T> backward(const Tensor<T>& dy, bool need_input_grad) override;
  std::unique_ptr<Layer<T>> clone() const override;

  double rate() const { return rate_; }
  void set_fixed_mask(bool fixed) { fixed_mask_ = fixed; }
  void reseed(std::uint64_t seed) { rng_ = Rng(seed); }

 private:
  double rate_;
  Rng rng_;
  bool fixed_mask_ = false;
  std::vector<T> mask_;
};

/// Fan-average uniform bound sqrt(6 / (fan_in + fan_out)).
double glorot_limit(std::size_t fan_in, std::size_t fan_out);

extern template class Layer<float>;
extern template class Layer<double>;

}  // namespace sprout
