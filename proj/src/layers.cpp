#include "sprout/layers.hpp"

#include <cmath>
#include <sstream>

namespace sprout {

std::string_view to_string(LayerKind kind) {
  switch (kind) {
    case LayerKind::input: return "input";
    case LayerKind::zeropad: return "zeropad";
    case LayerKind::conv: return "conv";
    case LayerKind::depthwise_conv: return "depthwise-conv";
    case LayerKind::batchnorm: return "batchnorm";
    case LayerKind::activation: return "activation";
    case LayerKind::global_avg_pool: return "global-avg-pool";
    case LayerKind::dense: return "dense";
    case LayerKind::dropout: return "dropout";
  }
  return "?";
}

std::string_view to_string(ParamRole role) {
  switch (role) {
    case ParamRole::kernel: return "kernel";
    case ParamRole::bias: return "bias";
    case ParamRole::gamma: return "gamma";
    case ParamRole::beta: return "beta";
    case ParamRole::moving_mean: return "moving_mean";
    case ParamRole::moving_var: return "moving_var";
  }
  return "?";
}

double glorot_limit(std::size_t fan_in, std::size_t fan_out) {
  return std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
}

namespace {

template <typename T>
void glorot_fill(Tensor<T>& t, std::size_t fan_in, std::size_t fan_out, Rng& rng) {
  const double limit = glorot_limit(fan_in, fan_out);
  for (auto& v : t.data()) v = static_cast<T>(rng.uniform(-limit, limit));
}

void require_cache(bool present, const std::string& layer) {
  if (!present) {
    throw Error("layer '" + layer + "' has no cached forward state; run forward with caching first");
  }
}

std::string pad_str(const Padding& p) {
  return "pad=" + std::to_string(p.top) + "/" + std::to_string(p.bottom) + "/" +
         std::to_string(p.left) + "/" + std::to_string(p.right);
}

}  // namespace

// ---- Layer ------------------------------------------------------------------

template <typename T>
Tensor<T> Layer<T>::backward_logits(const Tensor<T>&, bool) {
  throw Error("layer '" + name_ + "' does not produce a softmax output");
}

template <typename T>
Parameter<T>& Layer<T>::param(std::string_view name) {
  for (auto& p : params_)
    if (p.name == name) return p;
  throw ValueError("layer '" + name_ + "' has no parameter '" + std::string(name) + "'");
}

template <typename T>
const Parameter<T>& Layer<T>::param(std::string_view name) const {
  return const_cast<Layer<T>*>(this)->param(name);
}

template <typename T>
bool Layer<T>::has_learnable_params() const {
  for (const auto& p : params_)
    if (p.learnable()) return true;
  return false;
}

template <typename T>
void Layer<T>::set_frozen(bool frozen) {
  frozen_ = frozen;
  for (auto& p : params_) p.value.set_requires_grad(p.learnable() && !frozen);
}

template <typename T>
void Layer<T>::zero_grad() {
  for (auto& p : params_) p.value.zero_grad();
}

template <typename T>
Parameter<T>& Layer<T>::add_param(std::string name, ParamRole role, Shape shape, T fill) {
  params_.push_back(Parameter<T>{std::move(name), role, Tensor<T>(std::move(shape), fill), false});
  auto& p = params_.back();
  p.value.set_requires_grad(p.learnable() && !frozen_);
  return p;
}

template <typename T>
void Layer<T>::accumulate_grad(Parameter<T>& p, const Tensor<T>& g) {
  if (!p.value.has_grad()) return;
  auto dst = p.value.grad();
  for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += g[i];
}

// ---- InputLayer ---------------------------------------------------------------

template <typename T>
InputLayer<T>::InputLayer(std::string name, Shape shape)
    : Layer<T>(std::move(name)), shape_(std::move(shape)) {}

template <typename T>
std::string InputLayer<T>::hyper() const {
  return "shape=" + shape_str(shape_);
}

template <typename T>
Shape InputLayer<T>::output_shape(const Shape& input) const {
  if (input != shape_) {
    throw DimensionError("input layer expects " + shape_str(shape_) + ", got " + shape_str(input));
  }
  return shape_;
}

template <typename T>
Tensor<T> InputLayer<T>::forward(const Tensor<T>& x, Mode, bool) {
  if (x.rank() != shape_.size() + 1 || !std::equal(shape_.begin(), shape_.end(), x.shape().begin() + 1)) {
    throw DimensionError("input layer expects [N]" + shape_str(shape_) + ", got " +
                         shape_str(x.shape()));
  }
  return x;
}

template <typename T>
Tensor<T> InputLayer<T>::backward(const Tensor<T>& dy, bool) {
  return dy;
}

template <typename T>
std::unique_ptr<Layer<T>> InputLayer<T>::clone() const {
  return std::make_unique<InputLayer<T>>(*this);
}

// ---- ZeroPad2D ----------------------------------------------------------------

template <typename T>
ZeroPad2D<T>::ZeroPad2D(std::string name, Padding pad) : Layer<T>(std::move(name)), pad_(pad) {}

template <typename T>
std::string ZeroPad2D<T>::hyper() const {
  return pad_str(pad_);
}

template <typename T>
Shape ZeroPad2D<T>::output_shape(const Shape& in) const {
  if (in.size() != 3) throw DimensionError("zero padding expects HxWxC, got " + shape_str(in));
  return {in[0] + pad_.top + pad_.bottom, in[1] + pad_.left + pad_.right, in[2]};
}

template <typename T>
Tensor<T> ZeroPad2D<T>::forward(const Tensor<T>& x, Mode, bool) {
  return zero_pad_forward(x, pad_);
}

template <typename T>
Tensor<T> ZeroPad2D<T>::backward(const Tensor<T>& dy, bool) {
  return zero_pad_backward(dy, pad_);
}

template <typename T>
std::unique_ptr<Layer<T>> ZeroPad2D<T>::clone() const {
  return std::make_unique<ZeroPad2D<T>>(*this);
}

// ---- Conv2D -------------------------------------------------------------------

template <typename T>
Conv2D<T>::Conv2D(std::string name, std::size_t kernel_size, std::size_t in_channels,
                  std::size_t filters, std::size_t stride, Padding pad)
    : Layer<T>(std::move(name)), stride_(stride), pad_(pad) {
  if (stride == 0) throw ValueError("conv stride must be >= 1");
  this->add_param("kernel", ParamRole::kernel, {kernel_size, kernel_size, in_channels, filters});
}

template <typename T>
std::string Conv2D<T>::hyper() const {
  const auto& k = this->params_[0].value.shape();
  std::ostringstream os;
  os << k[0] << "x" << k[1] << " s" << stride_ << " f" << k[3];
  if (!pad_.is_zero()) os << " " << pad_str(pad_);
  return os.str();
}

template <typename T>
Shape Conv2D<T>::output_shape(const Shape& in) const {
  const auto& k = this->params_[0].value.shape();
  if (in.size() != 3 || in[2] != k[2]) {
    throw DimensionError("conv '" + this->name_ + "' expects HxWx" + std::to_string(k[2]) +
                         ", got " + shape_str(in));
  }
  return {conv_out_extent(in[0], pad_.top + pad_.bottom, k[0], stride_),
          conv_out_extent(in[1], pad_.left + pad_.right, k[1], stride_), k[3]};
}

template <typename T>
Tensor<T> Conv2D<T>::forward(const Tensor<T>& x, Mode, bool keep_cache) {
  auto y = conv2d_forward(x, this->params_[0].value, stride_, pad_);
  if (keep_cache) input_ = x;
  return y;
}

template <typename T>
Tensor<T> Conv2D<T>::backward(const Tensor<T>& dy, bool need_input_grad) {
  require_cache(!input_.empty(), this->name_);
  auto& kernel = this->params_[0];
  auto g = conv2d_backward(input_, kernel.value, dy, stride_, pad_, need_input_grad,
                           kernel.value.has_grad());
  if (kernel.value.has_grad()) this->accumulate_grad(kernel, g.kernel);
  return g.input;
}

template <typename T>
std::unique_ptr<Layer<T>> Conv2D<T>::clone() const {
  return std::make_unique<Conv2D<T>>(*this);
}

template <typename T>
void Conv2D<T>::initialize(Rng& rng) {
  auto& k = this->params_[0].value;
  const std::size_t area = k.dim(0) * k.dim(1);
  glorot_fill(k, area * k.dim(2), area * k.dim(3), rng);
}

// ---- DepthwiseConv2D ----------------------------------------------------------

template <typename T>
DepthwiseConv2D<T>::DepthwiseConv2D(std::string name, std::size_t kernel_size,
                                    std::size_t channels, std::size_t stride, Padding pad)
    : Layer<T>(std::move(name)), stride_(stride), pad_(pad) {
  if (stride == 0) throw ValueError("depthwise stride must be >= 1");
  this->add_param("kernel", ParamRole::kernel, {kernel_size, kernel_size, channels});
}

template <typename T>
std::string DepthwiseConv2D<T>::hyper() const {
  const auto& k = this->params_[0].value.shape();
  std::ostringstream os;
  os << k[0] << "x" << k[1] << " s" << stride_;
  if (!pad_.is_zero()) os << " " << pad_str(pad_);
  return os.str();
}

template <typename T>
Shape DepthwiseConv2D<T>::output_shape(const Shape& in) const {
  const auto& k = this->params_[0].value.shape();
  if (in.size() != 3 || in[2] != k[2]) {
    throw DimensionError("depthwise '" + this->name_ + "' expects HxWx" + std::to_string(k[2]) +
                         ", got " + shape_str(in));
  }
  return {conv_out_extent(in[0], pad_.top + pad_.bottom, k[0], stride_),
          conv_out_extent(in[1], pad_.left + pad_.right, k[1], stride_), k[2]};
}

template <typename T>
Tensor<T> DepthwiseConv2D<T>::forward(const Tensor<T>& x, Mode, bool keep_cache) {
  auto y = depthwise_conv2d_forward(x, this->params_[0].value, stride_, pad_);
  if (keep_cache) input_ = x;
  return y;
}

template <typename T>
Tensor<T> DepthwiseConv2D<T>::backward(const Tensor<T>& dy, bool need_input_grad) {
  require_cache(!input_.empty(), this->name_);
  auto& kernel = this->params_[0];
  auto g = depthwise_conv2d_backward(input_, kernel.value, dy, stride_, pad_, need_input_grad,
                                     kernel.value.has_grad());
  if (kernel.value.has_grad()) this->accumulate_grad(kernel, g.kernel);
  return g.input;
}

template <typename T>
std::unique_ptr<Layer<T>> DepthwiseConv2D<T>::clone() const {
  return std::make_unique<DepthwiseConv2D<T>>(*this);
}

template <typename T>
void DepthwiseConv2D<T>::initialize(Rng& rng) {
  auto& k = this->params_[0].value;
  const std::size_t area = k.dim(0) * k.dim(1);
  glorot_fill(k, area, area, rng);
}

// ---- BatchNorm ----------------------------------------------------------------

template <typename T>
BatchNorm<T>::BatchNorm(std::string name, std::size_t channels, double momentum, double epsilon)
    : Layer<T>(std::move(name)), momentum_(momentum), epsilon_(epsilon) {
  this->add_param("gamma", ParamRole::gamma, {channels}, T(1));
  this->add_param("beta", ParamRole::beta, {channels}, T(0));
  this->add_param("moving_mean", ParamRole::moving_mean, {channels}, T(0));
  this->add_param("moving_var", ParamRole::moving_var, {channels}, T(1));
}

template <typename T>
std::string BatchNorm<T>::hyper() const {
  std::ostringstream os;
  os << "momentum=" << momentum_ << " eps=" << epsilon_;
  return os.str();
}

template <typename T>
Shape BatchNorm<T>::output_shape(const Shape& in) const {
  if (in.empty() || in.back() != this->params_[0].value.size()) {
    throw DimensionError("batchnorm '" + this->name_ + "' expects " +
                         std::to_string(this->params_[0].value.size()) + " channels, got " +
                         shape_str(in));
  }
  return in;
}

template <typename T>
Tensor<T> BatchNorm<T>::forward(const Tensor<T>& x, Mode mode, bool keep_cache) {
  const Mode effective = this->frozen_ ? Mode::inference : mode;
  auto& p = this->params_;
  return batchnorm_forward(x, p[0].value, p[1].value, p[2].value, p[3].value, effective,
                           momentum_, epsilon_, keep_cache ? &cache_ : nullptr);
}

template <typename T>
Tensor<T> BatchNorm<T>::backward(const Tensor<T>& dy, bool) {
  require_cache(!cache_.normalized.empty(), this->name_);
  auto g = batchnorm_backward(dy, this->params_[0].value, cache_);
  this->accumulate_grad(this->params_[0], g.gamma);
  this->accumulate_grad(this->params_[1], g.beta);
  return std::move(g.input);
}

template <typename T>
std::unique_ptr<Layer<T>> BatchNorm<T>::clone() const {
  return std::make_unique<BatchNorm<T>>(*this);
}

// ---- ActivationLayer ----------------------------------------------------------

template <typename T>
ActivationLayer<T>::ActivationLayer(std::string name, Activation kind)
    : Layer<T>(std::move(name)), activation_(kind) {}

template <typename T>
std::string ActivationLayer<T>::hyper() const {
  return std::string(to_string(activation_));
}

template <typename T>
Tensor<T> ActivationLayer<T>::forward(const Tensor<T>& x, Mode, bool keep_cache) {
  auto y = activation_forward(x, activation_);
  if (keep_cache) output_ = y;
  return y;
}

template <typename T>
Tensor<T> ActivationLayer<T>::backward(const Tensor<T>& dy, bool) {
  require_cache(!output_.empty(), this->name_);
  return activation_backward(output_, dy, activation_);
}

template <typename T>
Tensor<T> ActivationLayer<T>::backward_logits(const Tensor<T>& dlogits, bool) {
  if (activation_ != Activation::softmax) return Layer<T>::backward_logits(dlogits, true);
  return dlogits;
}

template <typename T>
std::unique_ptr<Layer<T>> ActivationLayer<T>::clone() const {
  return std::make_unique<ActivationLayer<T>>(*this);
}

// ---- GlobalAvgPool ------------------------------------------------------------

template <typename T>
Shape GlobalAvgPool<T>::output_shape(const Shape& in) const {
  if (in.size() != 3) throw DimensionError("global average pooling expects HxWxC, got " + shape_str(in));
  return {in[2]};
}

template <typename T>
Tensor<T> GlobalAvgPool<T>::forward(const Tensor<T>& x, Mode, bool keep_cache) {
  if (keep_cache) input_shape_ = x.shape();
  return global_avg_pool_forward(x);
}

template <typename T>
Tensor<T> GlobalAvgPool<T>::backward(const Tensor<T>& dy, bool) {
  require_cache(!input_shape_.empty(), this->name_);
  return global_avg_pool_backward(dy, input_shape_);
}

template <typename T>
std::unique_ptr<Layer<T>> GlobalAvgPool<T>::clone() const {
  return std::make_unique<GlobalAvgPool<T>>(*this);
}

// ---- Dense --------------------------------------------------------------------

template <typename T>
Dense<T>::Dense(std::string name, std::size_t in_features, std::size_t units,
                Activation activation, bool l2_regularized)
    : Layer<T>(std::move(name)), units_(units), activation_(activation) {
  if (activation == Activation::relu6) throw ValueError("dense layers support linear, relu or softmax");
  this->add_param("kernel", ParamRole::kernel, {in_features, units}).l2 = l2_regularized;
  this->add_param("bias", ParamRole::bias, {units});
}

template <typename T>
std::string Dense<T>::hyper() const {
  std::string s = "units=" + std::to_string(units_) + " " + std::string(to_string(activation_));
  if (this->params_[0].l2) s += " l2";
  return s;
}

template <typename T>
Shape Dense<T>::output_shape(const Shape& in) const {
  const std::size_t d = this->params_[0].value.dim(0);
  if (in.size() != 1 || in[0] != d) {
    throw DimensionError("dense '" + this->name_ + "' expects " + std::to_string(d) +
                         " features, got " + shape_str(in));
  }
  return {units_};
}

template <typename T>
Tensor<T> Dense<T>::forward(const Tensor<T>& x, Mode, bool keep_cache) {
  auto z = dense_forward(x, this->params_[0].value, this->params_[1].value);
  auto y = activation_forward(z, activation_);
  if (keep_cache) {
    input_ = x;
    output_ = y;
  }
  return y;
}

template <typename T>
Tensor<T> Dense<T>::backward(const Tensor<T>& dy, bool need_input_grad) {
  require_cache(!output_.empty(), this->name_);
  return backward_logits(activation_backward(output_, dy, activation_), need_input_grad);
}

template <typename T>
Tensor<T> Dense<T>::backward_logits(const Tensor<T>& dz, bool need_input_grad) {
  require_cache(!input_.empty(), this->name_);
  auto& kernel = this->params_[0];
  auto& bias = this->params_[1];
  const bool want_params = kernel.value.has_grad();
  auto g = dense_backward(input_, kernel.value, dz, need_input_grad, want_params);
  if (want_params) {
    this->accumulate_grad(kernel, g.weight);
    this->accumulate_grad(bias, g.bias);
  }
  return std::move(g.input);
}

template <typename T>
std::unique_ptr<Layer<T>> Dense<T>::clone() const {
  return std::make_unique<Dense<T>>(*this);
}

template <typename T>
void Dense<T>::initialize(Rng& rng) {
  auto& k = this->params_[0].value;
  glorot_fill(k, k.dim(0), k.dim(1), rng);
}

// ---- Dropout ------------------------------------------------------------------

template <typename T>
Dropout<T>::Dropout(std::string name, double rate, std::uint64_t seed)
    : Layer<T>(std::move(name)), rate_(rate), rng_(seed) {
  if (!(rate >= 0.0 && rate < 1.0)) {
    throw ValueError("dropout rate must lie in [0, 1), got " + std::to_string(rate));
  }
}

template <typename T>
std::string Dropout<T>::hyper() const {
  std::ostringstream os;
  os << "rate=" << rate_;
  return os.str();
}

template <typename T>
Tensor<T> Dropout<T>::forward(const Tensor<T>& x, Mode mode, bool) {
  if (fixed_mask_ && mask_.size() == x.size()) {
    return mode == Mode::train ? dropout_apply_mask(x, mask_) : x;
  }
  return dropout_forward(x, rate_, mode, rng_, &mask_);
}

template <typename T>
Tensor<T> Dropout<T>::backward(const Tensor<T>& dy, bool) {
  return dropout_apply_mask(dy, mask_);
}

template <typename T>
std::unique_ptr<Layer<T>> Dropout<T>::clone() const {
  return std::make_unique<Dropout<T>>(*this);
}

#define SPROUT_INSTANTIATE_LAYERS(T) \
  template class Layer<T>;           \
  template class InputLayer<T>;      \
  template class ZeroPad2D<T>;       \
  template class Conv2D<T>;          \
  template class DepthwiseConv2D<T>; \
  template class BatchNorm<T>;       \
  template class ActivationLayer<T>; \
  template class GlobalAvgPool<T>;   \
  template class Dense<T>;           \
  template class Dropout<T>;

SPROUT_INSTANTIATE_LAYERS(float)
SPROUT_INSTANTIATE_LAYERS(double)

#undef SPROUT_INSTANTIATE_LAYERS

}  // namespace sprout
