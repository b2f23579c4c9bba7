#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "sprout/model.hpp"
#include "sprout/optim.hpp"

namespace sprout {

inline constexpr std::string_view kArchiveMagic = "SPRT1";
inline constexpr std::string_view kFormatVersion = "1";

struct ArchiveTensor {
  Shape shape;
  std::vector<float> values;

  friend bool operator==(const ArchiveTensor&, const ArchiveTensor&) = default;
};

/**
 * Named f32 tensors plus a string metadata map, stored as
 *   "SPRT1" | u64 LE header length | JSON header | payload
 * The header maps each name to {dtype, shape, offset, length} with keys in
 * sorted order, and holds the metadata under "__metadata__". Payload offsets
 * follow name order, so equal content always serializes to equal bytes.
 */
class TensorArchive {
 public:
  void add(const std::string& name, Shape shape, std::vector<float> values);
  bool contains(const std::string& name) const { return tensors_.count(name) != 0; }
  /// Throws FormatError naming the tensor when absent.
  const ArchiveTensor& get(const std::string& name) const;
  void erase(const std::string& name) { tensors_.erase(name); }
  const std::map<std::string, ArchiveTensor>& tensors() const { return tensors_; }
  std::size_t size() const { return tensors_.size(); }

  std::map<std::string, std::string>& metadata() { return metadata_; }
  const std::map<std::string, std::string>& metadata() const { return metadata_; }
  /// Throws FormatError when the key is missing.
  const std::string& meta(const std::string& key) const;

  std::string serialize() const;
  /// Validates magic, header bounds, dtype, lengths and offsets.
  static TensorArchive parse(std::string_view bytes, const std::string& origin = "archive");

  /// Atomic: writes a temporary sibling then renames it over `path`.
  void save(const std::filesystem::path& path) const;
  static TensorArchive load(const std::filesystem::path& path);

  friend bool operator==(const TensorArchive&, const TensorArchive&) = default;

 private:
  std::map<std::string, ArchiveTensor> tensors_;
  std::map<std::string, std::string> metadata_;
};

/// Training progress persisted next to the weights.
struct TrainState {
  std::size_t epoch = 0;
  double learning_rate = 1e-3;
  OptimizerState optimizer;
};

/// Architecture details recorded in checkpoint metadata.
struct CheckpointInfo {
  double alpha = 1.0;
  std::size_t input_size = 224;
  std::vector<std::string> class_names;
};

/// FNV-1a over every layer's name, kind, hyper-parameters, output shape and
/// parameter shapes. Trainability does not enter the checksum.
std::string architecture_checksum(const Model<float>& model);

/// Every parameter under "<layer>.<param>", optimizer moments under
/// "optimizer.m.<name>" / "optimizer.v.<name>", step / lr / epoch metadata.
TensorArchive make_checkpoint(const Model<float>& model, const TrainState& state,
                              const CheckpointInfo& info = {});
void save_checkpoint(const Model<float>& model, const TrainState& state,
                     const std::filesystem::path& path, const CheckpointInfo& info = {});

/**
 * Copies the archive into the model. Everything is validated first: the
 * format version, the presence and shape of every parameter and of every
 * stored moment, and the architecture checksum; the model is untouched when
 * any check fails.
 */
TrainState load_checkpoint(const TensorArchive& archive, Model<float>& model);
TrainState load_checkpoint(const std::filesystem::path& path, Model<float>& model);

/// Maps a model parameter name to the archive name it is imported from;
/// nullopt leaves the parameter out of the import.
using NameMap = std::function<std::optional<std::string>(const std::string&)>;

/// Archive names equal model names.
NameMap identity_name_map();
/// Names as found in common Keras MobileNet weight exports
/// (conv1/kernel:0, conv_dw_3_bn/moving_variance:0, conv_pw_13/kernel:0, ...).
NameMap keras_mobilenet_name_map();

struct ImportReport {
  std::size_t imported = 0;
  /// Archive tensors that no backbone parameter maps to.
  std::vector<std::string> ignored;
};

/**
 * Replaces every backbone parameter with its mapped archive tensor. Shapes
 * must match after dropping extents of 1 (Keras stores depthwise kernels as
 * [k, k, C, 1]). Validates everything before writing. Head weights and
 * trainability are left as they are.
 */
ImportReport import_backbone(const TensorArchive& archive, Model<float>& model,
                             const NameMap& name_map = identity_name_map());

}  // namespace sprout
