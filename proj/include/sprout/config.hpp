#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "sprout/augment.hpp"
#include "sprout/dataset.hpp"
#include "sprout/model.hpp"
#include "sprout/trainer.hpp"

namespace sprout {

/**
 * Complete experiment description. Text form is one `key = value` per line;
 * `#` starts a comment, blank lines are ignored, later keys win.
 */
struct Config {
  std::filesystem::path data_dir;
  std::filesystem::path out_dir = "runs/latest";
  std::uint64_t seed = 42;
  SplitRatios split;
  bool stratified = true;
  AugmentPolicy augment;
  TrainConfig train;
  double alpha = 1.0;
  std::size_t image_size = 224;
  std::size_t num_classes = 7;
  std::size_t freeze_prefix = 80;
  HeadSpec head;
  bool deterministic = false;
  /// 0 keeps the SPROUT_THREADS / hardware default.
  std::size_t threads = 0;

  /// Applies one key; throws FormatError for unknown keys or bad values.
  void set(const std::string& key, const std::string& value);
  /// Merges `key = value` lines; `origin` prefixes error messages.
  void merge_text(const std::string& text, const std::string& origin = "config");
  void merge_file(const std::filesystem::path& path);
  /// Effective configuration in the text format, keys in a fixed order.
  std::string to_text() const;
  /// Cross-field checks (ratios, ranges, sizes); throws ValueError.
  void validate() const;

  ModelOptions model_options() const;
  SplitSpec split_spec() const;
};

/// Every key in to_text() order.
const std::vector<std::string>& config_keys();

}  // namespace sprout
