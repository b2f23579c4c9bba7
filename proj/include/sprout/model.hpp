#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "sprout/layers.hpp"

namespace sprout {

struct ParamCounts {
  std::size_t total = 0;
  std::size_t trainable = 0;
  std::size_t non_trainable = 0;

  friend bool operator==(const ParamCounts&, const ParamCounts&) = default;
};

/// Classification head appended after the backbone: global average pooling,
/// then one (dense relu + dropout) pair per entry of `units`, then a softmax
/// dense layer. Hidden dense kernels carry the L2 flag.
struct HeadSpec {
  std::vector<std::size_t> units{256, 128};
  double dropout = 0.25;
  bool l2 = true;
};

struct ModelOptions {
  double alpha = 1.0;
  std::size_t input_size = 224;
  std::size_t num_classes = 7;
  std::size_t freeze_prefix = 80;
  HeadSpec head;
  std::uint64_t seed = 42;
  double bn_momentum = 0.99;
  double bn_epsilon = 1e-3;
};

/// One row of the canonical layer enumeration.
struct LayerRow {
  std::size_t index;
  std::string name;
  std::string kind;
  std::string hyper;
  Shape output_shape;
  std::size_t tensors;
  ParamCounts params;
  bool frozen;
};

/// Non-owning handle to a parameter with its canonical "<layer>.<param>" name.
template <typename T>
struct ParamRef {
  std::string name;
  Parameter<T>* param;
  Layer<T>* layer;
};

template <typename T>
struct ConstParamRef {
  std::string name;
  const Parameter<T>* param;
  const Layer<T>* layer;
};

/// Every parameter value (moving statistics included) in parameters() order.
template <typename T>
using WeightSnapshot = std::vector<std::vector<T>>;

/**
 * Sequential network with a canonical layer enumeration.
 *
 * Layers below the lowest trainable layer keep no backward state: backward
 * stops there unless propagate_to_input is enabled, in which case input
 * gradients flow through frozen layers down to the input.
 */
template <typename T>
class Model {
 public:
  Model(Shape input_shape, std::vector<std::unique_ptr<Layer<T>>> layers,
        std::size_t backbone_size = 0);
  Model(const Model& other);
  Model& operator=(const Model& other);
  Model(Model&&) noexcept = default;
  Model& operator=(Model&&) noexcept = default;

  std::size_t size() const { return layers_.size(); }
  Layer<T>& layer(std::size_t i) { return *layers_.at(i); }
  const Layer<T>& layer(std::size_t i) const { return *layers_.at(i); }
  Layer<T>& layer(const std::string& name);
  const Shape& input_shape() const { return input_shape_; }
  /// Per-example output shape of layer i.
  const Shape& output_shape(std::size_t i) const { return shapes_.at(i); }
  std::size_t backbone_size() const { return backbone_size_; }
  std::size_t num_outputs() const { return shapes_.back().back(); }

  /// keep_cache = false skips backward state everywhere (pure evaluation).
  Tensor<T> forward(const Tensor<T>& x, Mode mode, bool keep_cache = true);
  /// Backward from the gradient of the loss with respect to the pre-softmax
  /// output. Returns the input gradient when propagating to the input.
  Tensor<T> backward_logits(const Tensor<T>& dlogits);
  /// Backward from the gradient with respect to the model output.
  Tensor<T> backward(const Tensor<T>& dy);

  void set_propagate_to_input(bool on) { propagate_to_input_ = on; }
  bool propagate_to_input() const { return propagate_to_input_; }

  void zero_grad();
  void clear_caches();

  std::vector<ParamRef<T>> parameters();
  std::vector<ConstParamRef<T>> parameters() const;
  std::vector<ParamRef<T>> trainable_parameters();

  ParamCounts count_params() const;
  /// Freezes layers [0, n) and unfreezes the rest; n may not exceed the backbone.
  void freeze_prefix(std::size_t n);
  std::size_t frozen_prefix() const { return frozen_prefix_; }

  WeightSnapshot<T> snapshot() const;
  void restore(const WeightSnapshot<T>& snap);

  std::vector<LayerRow> enumeration() const;
  /// Reseeds every dropout layer from `seed` and its layer index.
  void reseed_dropout(std::uint64_t seed);

 private:
  void validate();
  std::size_t backward_floor() const;

  Shape input_shape_;
  std::vector<std::unique_ptr<Layer<T>>> layers_;
  std::vector<Shape> shapes_;
  std::size_t backbone_size_ = 0;
  std::size_t frozen_prefix_ = 0;
  bool propagate_to_input_ = false;
};

/// Per-block (output channels, stride) of the depthwise-separable backbone at alpha = 1.
struct BlockSpec {
  std::size_t filters;
  std::size_t stride;
};
const std::vector<BlockSpec>& backbone_blocks();

/// Backbone layer count: 5 stem layers plus 6 per block, 7 for strided blocks.
std::size_t backbone_layer_count();

/**
 * Builds the MobileNet-v1 backbone and classification head.
 *
 * Throws ValueError for an alpha outside {0.25, 0.5, 0.75, 1.0}, an input
 * size not divisible by 32, or a freeze prefix beyond the backbone.
 */
template <typename T>
Model<T> build_model(const ModelOptions& options);

template <typename T>
ParamCounts count_params(const Model<T>& model) {
  return model.count_params();
}

/// Canonical enumeration as CSV:
/// index,name,kind,hyper,output_shape,tensors,params,trainable,non_trainable,frozen
template <typename T>
std::string enumeration_csv(const Model<T>& model);

extern template class Model<float>;
extern template class Model<double>;

}  // namespace sprout
