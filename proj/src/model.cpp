#include "sprout/model.hpp"

#include <cmath>
#include <sstream>

namespace sprout {

template <typename T>
Model<T>::Model(Shape input_shape, std::vector<std::unique_ptr<Layer<T>>> layers,
                std::size_t backbone_size)
    : input_shape_(std::move(input_shape)),
      layers_(std::move(layers)),
      backbone_size_(backbone_size) {
  validate();
}

template <typename T>
Model<T>::Model(const Model& other)
    : input_shape_(other.input_shape_),
      shapes_(other.shapes_),
      backbone_size_(other.backbone_size_),
      frozen_prefix_(other.frozen_prefix_),
      propagate_to_input_(other.propagate_to_input_) {
  layers_.reserve(other.layers_.size());
  for (const auto& l : other.layers_) layers_.push_back(l->clone());
}

template <typename T>
Model<T>& Model<T>::operator=(const Model& other) {
  if (this != &other) {
    Model copy(other);
    *this = std::move(copy);
  }
  return *this;
}

template <typename T>
void Model<T>::validate() {
  if (layers_.empty()) throw ValueError("model needs at least one layer");
  if (backbone_size_ > layers_.size()) throw ValueError("backbone larger than the model");
  shapes_.clear();
  Shape s = input_shape_;
  std::size_t softmax_layers = 0;
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    try {
      s = layers_[i]->output_shape(s);
    } catch (const DimensionError& e) {
      throw DimensionError("layer " + std::to_string(i) + " ('" + layers_[i]->name() +
                           "'): " + e.what());
    }
    shapes_.push_back(s);
    if (layers_[i]->outputs_softmax()) ++softmax_layers;
  }
  if (softmax_layers > 1 || (softmax_layers == 1 && !layers_.back()->outputs_softmax())) {
    throw ValueError("a softmax layer may only appear once, as the final layer");
  }
}

template <typename T>
Layer<T>& Model<T>::layer(const std::string& name) {
  for (auto& l : layers_)
    if (l->name() == name) return *l;
  throw ValueError("model has no layer named '" + name + "'");
}

template <typename T>
std::size_t Model<T>::backward_floor() const {
  if (propagate_to_input_) return 0;
  for (std::size_t i = 0; i < layers_.size(); ++i)
    if (layers_[i]->trainable()) return i;
  return layers_.size();
}

template <typename T>
Tensor<T> Model<T>::forward(const Tensor<T>& x, Mode mode, bool keep_cache) {
  const std::size_t floor = backward_floor();
  Tensor<T> h = x;
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    h = layers_[i]->forward(h, mode, keep_cache && i >= floor);
  }
  return h;
}

template <typename T>
Tensor<T> Model<T>::backward_logits(const Tensor<T>& dlogits) {
  if (!layers_.back()->outputs_softmax()) {
    throw Error("backward_logits requires a softmax output layer");
  }
  const std::size_t floor = backward_floor();
  const std::size_t last = layers_.size() - 1;
  if (last < floor) return {};
  Tensor<T> g = layers_[last]->backward_logits(dlogits, last > floor || propagate_to_input_);
  for (std::size_t i = last; i-- > floor;) {
    g = layers_[i]->backward(g, i > floor || propagate_to_input_);
  }
  return g;
}

template <typename T>
Tensor<T> Model<T>::backward(const Tensor<T>& dy) {
  const std::size_t floor = backward_floor();
  Tensor<T> g = dy;
  for (std::size_t i = layers_.size(); i-- > floor;) {
    g = layers_[i]->backward(g, i > floor || propagate_to_input_);
  }
  return g;
}

template <typename T>
void Model<T>::zero_grad() {
  for (auto& l : layers_) l->zero_grad();
}

template <typename T>
void Model<T>::clear_caches() {
  for (auto& l : layers_) l->clear_cache();
}

template <typename T>
std::vector<ParamRef<T>> Model<T>::parameters() {
  std::vector<ParamRef<T>> out;
  for (auto& l : layers_)
    for (auto& p : l->params()) out.push_back({l->name() + "." + p.name, &p, l.get()});
  return out;
}

template <typename T>
std::vector<ConstParamRef<T>> Model<T>::parameters() const {
  std::vector<ConstParamRef<T>> out;
  for (const auto& l : layers_)
    for (const auto& p : l->params()) out.push_back({l->name() + "." + p.name, &p, l.get()});
  return out;
}

template <typename T>
std::vector<ParamRef<T>> Model<T>::trainable_parameters() {
  std::vector<ParamRef<T>> out;
  for (auto& r : parameters())
    if (r.param->learnable() && !r.layer->frozen()) out.push_back(r);
  return out;
}

namespace {

template <typename T>
ParamCounts layer_counts(const Layer<T>& l) {
  ParamCounts c;
  for (const auto& p : l.params()) {
    const std::size_t n = p.value.size();
    c.total += n;
    if (p.learnable() && !l.frozen()) {
      c.trainable += n;
    } else {
      c.non_trainable += n;
    }
  }
  return c;
}

}  // namespace

template <typename T>
ParamCounts Model<T>::count_params() const {
  ParamCounts c;
  for (const auto& l : layers_) {
    const auto lc = layer_counts(*l);
    c.total += lc.total;
    c.trainable += lc.trainable;
    c.non_trainable += lc.non_trainable;
  }
  return c;
}

template <typename T>
void Model<T>::freeze_prefix(std::size_t n) {
  const std::size_t limit = backbone_size_ > 0 ? backbone_size_ : layers_.size();
  if (n > limit) {
    throw ValueError("freeze prefix " + std::to_string(n) + " out of range [0, " +
                     std::to_string(limit) + "]");
  }
  for (std::size_t i = 0; i < layers_.size(); ++i) layers_[i]->set_frozen(i < n);
  frozen_prefix_ = n;
}

template <typename T>
WeightSnapshot<T> Model<T>::snapshot() const {
  WeightSnapshot<T> snap;
  for (const auto& l : layers_)
    for (const auto& p : l->params()) snap.push_back(p.value.values());
  return snap;
}

template <typename T>
void Model<T>::restore(const WeightSnapshot<T>& snap) {
  std::size_t k = 0;
  for (auto& l : layers_)
    for (auto& p : l->params()) {
      if (k >= snap.size() || snap[k].size() != p.value.size()) {
        throw DimensionError("weight snapshot does not match the model at " + l->name() + "." +
                             p.name);
      }
      std::copy(snap[k].begin(), snap[k].end(), p.value.data().begin());
      ++k;
    }
  if (k != snap.size()) throw DimensionError("weight snapshot has extra tensors");
}

template <typename T>
std::vector<LayerRow> Model<T>::enumeration() const {
  std::vector<LayerRow> rows;
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    const auto& l = *layers_[i];
    rows.push_back(LayerRow{i, l.name(), std::string(to_string(l.kind())), l.hyper(), shapes_[i],
                            l.params().size(), layer_counts(l), l.frozen()});
  }
  return rows;
}

template <typename T>
void Model<T>::reseed_dropout(std::uint64_t seed) {
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    if (auto* d = dynamic_cast<Dropout<T>*>(layers_[i].get())) d->reseed(mix_seed(seed ^ i));
  }
}

const std::vector<BlockSpec>& backbone_blocks() {
  static const std::vector<BlockSpec> blocks{
      {64, 1},  {128, 2}, {128, 1}, {256, 2}, {256, 1}, {512, 2},  {512, 1},
      {512, 1}, {512, 1}, {512, 1}, {512, 1}, {1024, 2}, {1024, 1}};
  return blocks;
}

std::size_t backbone_layer_count() {
  std::size_t n = 5;
  for (const auto& b : backbone_blocks()) n += b.stride == 2 ? 7 : 6;
  return n;
}

namespace {

std::size_t scaled(std::size_t channels, double alpha) {
  return static_cast<std::size_t>(static_cast<double>(channels) * alpha);
}

}  // namespace

template <typename T>
Model<T> build_model(const ModelOptions& o) {
  bool alpha_ok = false;
  for (double a : {0.25, 0.5, 0.75, 1.0}) alpha_ok = alpha_ok || std::abs(o.alpha - a) < 1e-12;
  if (!alpha_ok) {
    throw ValueError("alpha must be one of 0.25, 0.5, 0.75, 1.0; got " + std::to_string(o.alpha));
  }
  if (o.input_size == 0 || o.input_size % 32 != 0) {
    throw ValueError("input size must be a positive multiple of 32, got " +
                     std::to_string(o.input_size));
  }
  if (o.num_classes < 2) throw ValueError("need at least 2 classes");
  if (o.freeze_prefix > backbone_layer_count()) {
    throw ValueError("freeze prefix " + std::to_string(o.freeze_prefix) + " out of range [0, " +
                     std::to_string(backbone_layer_count()) + "]");
  }

  std::vector<std::unique_ptr<Layer<T>>> layers;
  auto add = [&layers](auto layer) { layers.push_back(std::move(layer)); };
  const double mom = o.bn_momentum, eps = o.bn_epsilon;

  add(std::make_unique<InputLayer<T>>("input", Shape{o.input_size, o.input_size, 3}));
  std::size_t channels = scaled(32, o.alpha);
  add(std::make_unique<ZeroPad2D<T>>("stem.pad", Padding::bottom_right(1)));
  add(std::make_unique<Conv2D<T>>("stem.conv", 3, 3, channels, 2));
  add(std::make_unique<BatchNorm<T>>("stem.bn", channels, mom, eps));
  add(std::make_unique<ActivationLayer<T>>("stem.relu", Activation::relu6));

  const auto& blocks = backbone_blocks();
  for (std::size_t b = 0; b < blocks.size(); ++b) {
    const std::string p = "b" + std::to_string(b + 1);
    const std::size_t out = scaled(blocks[b].filters, o.alpha);
    if (blocks[b].stride == 2) {
      add(std::make_unique<ZeroPad2D<T>>(p + ".pad", Padding::bottom_right(1)));
      add(std::make_unique<DepthwiseConv2D<T>>(p + ".dw", 3, channels, 2));
    } else {
      add(std::make_unique<DepthwiseConv2D<T>>(p + ".dw", 3, channels, 1, Padding::uniform(1)));
    }
    add(std::make_unique<BatchNorm<T>>(p + ".dw.bn", channels, mom, eps));
    add(std::make_unique<ActivationLayer<T>>(p + ".dw.relu", Activation::relu6));
    add(std::make_unique<Conv2D<T>>(p + ".pw", 1, channels, out, 1));
    add(std::make_unique<BatchNorm<T>>(p + ".pw.bn", out, mom, eps));
    add(std::make_unique<ActivationLayer<T>>(p + ".pw.relu", Activation::relu6));
    channels = out;
  }
  const std::size_t backbone = layers.size();

  add(std::make_unique<GlobalAvgPool<T>>("head.gap"));
  std::size_t features = channels;
  for (std::size_t i = 0; i < o.head.units.size(); ++i) {
    const std::string k = std::to_string(i + 1);
    add(std::make_unique<Dense<T>>("head.dense" + k, features, o.head.units[i], Activation::relu,
                                   o.head.l2));
    add(std::make_unique<Dropout<T>>("head.dropout" + k, o.head.dropout, 0));
    features = o.head.units[i];
  }
  add(std::make_unique<Dense<T>>("head.output", features, o.num_classes, Activation::softmax));

  Model<T> model({o.input_size, o.input_size, 3}, std::move(layers), backbone);
  Rng rng(o.seed);
  for (std::size_t i = 0; i < model.size(); ++i) model.layer(i).initialize(rng);
  model.reseed_dropout(o.seed);
  model.freeze_prefix(o.freeze_prefix);
  return model;
}

template <typename T>
std::string enumeration_csv(const Model<T>& model) {
  std::ostringstream os;
  os << "index,name,kind,hyper,output_shape,tensors,params,trainable,non_trainable,frozen\n";
  for (const auto& r : model.enumeration()) {
    std::string shape;
    for (std::size_t i = 0; i < r.output_shape.size(); ++i) {
      if (i) shape += "x";
      shape += std::to_string(r.output_shape[i]);
    }
    os << r.index << ',' << r.name << ',' << r.kind << ',' << r.hyper << ',' << shape << ','
       << r.tensors << ',' << r.params.total << ',' << r.params.trainable << ','
       << r.params.non_trainable << ',' << (r.frozen ? 1 : 0) << '\n';
  }
  return os.str();
}

template class Model<float>;
template class Model<double>;
template Model<float> build_model<float>(const ModelOptions&);
template Model<double> build_model<double>(const ModelOptions&);
template std::string enumeration_csv(const Model<float>&);
template std::string enumeration_csv(const Model<double>&);

}  // namespace sprout
