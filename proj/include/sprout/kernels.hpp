#pragma once

#include <cstddef>
#include <string_view>
#include <vector>

#include "sprout/rng.hpp"
#include "sprout/tensor.hpp"

// Forward and backward kernels for the sequential layer set. Spatial tensors
// are NHWC, convolution is cross-correlation (no kernel flip), and every
// reduction runs in a fixed order so results are reproducible bit for bit.

namespace sprout {

enum class Mode { train, inference };

/// Explicit zero padding of the two spatial axes.
struct Padding {
  std::size_t top = 0;
  std::size_t bottom = 0;
  std::size_t left = 0;
  std::size_t right = 0;

  static constexpr Padding none() { return {}; }
  static constexpr Padding uniform(std::size_t p) { return {p, p, p, p}; }
  /// Bottom/right only; the layout used ahead of stride-2 3x3 convolutions.
  static constexpr Padding bottom_right(std::size_t p) { return {0, p, 0, p}; }

  bool is_zero() const { return top == 0 && bottom == 0 && left == 0 && right == 0; }
  friend bool operator==(const Padding&, const Padding&) = default;
};

enum class Activation { linear, relu, relu6, softmax };

std::string_view to_string(Activation a);

/// Output extent of a strided valid window; throws when non-positive.
std::size_t conv_out_extent(std::size_t in, std::size_t pad_total, std::size_t kernel,
                            std::size_t stride);

template <typename T>
Tensor<T> zero_pad_forward(const Tensor<T>& x, const Padding& pad);
template <typename T>
Tensor<T> zero_pad_backward(const Tensor<T>& dy, const Padding& pad);

template <typename T>
struct ConvGrads {
  Tensor<T> input;  // empty when not requested
  Tensor<T> kernel;
};

/// x [N,H,W,C], kernel [kh,kw,C,F] -> [N,H',W',F].
template <typename T>
Tensor<T> conv2d_forward(const Tensor<T>& x, const Tensor<T>& kernel, std::size_t stride,
                         const Padding& pad);
template <typename T>
ConvGrads<T> conv2d_backward(const Tensor<T>& x, const Tensor<T>& kernel, const Tensor<T>& dy,
                             std::size_t stride, const Padding& pad, bool need_input_grad,
                             bool need_kernel_grad = true);

/// x [N,H,W,C], kernel [kh,kw,C] -> [N,H',W',C]; channel c only sees channel c.
template <typename T>
Tensor<T> depthwise_conv2d_forward(const Tensor<T>& x, const Tensor<T>& kernel,
                                   std::size_t stride, const Padding& pad);
template <typename T>
ConvGrads<T> depthwise_conv2d_backward(const Tensor<T>& x, const Tensor<T>& kernel,
                                       const Tensor<T>& dy, std::size_t stride,
                                       const Padding& pad, bool need_input_grad,
                                       bool need_kernel_grad = true);

/// Values kept by batchnorm_forward for the backward pass.
template <typename T>
struct BatchNormCache {
  Tensor<T> normalized;
  std::vector<T> inv_std;
  Mode mode = Mode::inference;
};

template <typename T>
struct BatchNormGrads {
  Tensor<T> input;
  Tensor<T> gamma;
  Tensor<T> beta;
};

/**
 * Per-channel normalization over every axis but the last.
 *
 * Train mode normalizes with the biased batch statistics and folds them into
 * the moving estimates as m <- momentum * m + (1 - momentum) * stat.
 * Inference mode uses the moving estimates and leaves them untouched.
 */
template <typename T>
Tensor<T> batchnorm_forward(const Tensor<T>& x, const Tensor<T>& gamma, const Tensor<T>& beta,
                            Tensor<T>& moving_mean, Tensor<T>& moving_var, Mode mode,
                            double momentum, double epsilon, BatchNormCache<T>* cache = nullptr);
template <typename T>
BatchNormGrads<T> batchnorm_backward(const Tensor<T>& dy, const Tensor<T>& gamma,
                                     const BatchNormCache<T>& cache);

/// Softmax runs over the last axis with max subtraction.
template <typename T>
Tensor<T> activation_forward(const Tensor<T>& x, Activation kind);
/// Gradient through an activation given its forward *output*.
template <typename T>
Tensor<T> activation_backward(const Tensor<T>& y, const Tensor<T>& dy, Activation kind);

/// [N,H,W,C] -> [N,C].
template <typename T>
Tensor<T> global_avg_pool_forward(const Tensor<T>& x);
template <typename T>
Tensor<T> global_avg_pool_backward(const Tensor<T>& dy, const Shape& input_shape);

/// Inverted dropout. In train mode `mask` receives the per-element scale
/// (0 or 1/(1-rate)); inference is the identity.
template <typename T>
Tensor<T> dropout_forward(const Tensor<T>& x, double rate, Mode mode, Rng& rng,
                          std::vector<T>* mask = nullptr);
template <typename T>
Tensor<T> dropout_apply_mask(const Tensor<T>& x, const std::vector<T>& mask);

template <typename T>
struct DenseGrads {
  Tensor<T> input;
  Tensor<T> weight;
  Tensor<T> bias;
};

/// x [N,D] * weight [D,U] + bias [U].
template <typename T>
Tensor<T> dense_forward(const Tensor<T>& x, const Tensor<T>& weight, const Tensor<T>& bias);
template <typename T>
DenseGrads<T> dense_backward(const Tensor<T>& x, const Tensor<T>& weight, const Tensor<T>& dy,
                             bool need_input_grad, bool need_param_grads = true);

}  // namespace sprout
