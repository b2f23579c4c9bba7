#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "sprout/augment.hpp"
#include "sprout/tensor.hpp"

namespace sprout {

struct ManifestEntry {
  std::string path;  // relative to Manifest::root, '/' separated
  std::size_t class_index = 0;

  friend bool operator==(const ManifestEntry&, const ManifestEntry&) = default;
};

/// Class-per-directory image listing. Classes are sorted lexicographically
/// and entries are grouped by class, sorted by path within a class.
struct Manifest {
  std::filesystem::path root;
  std::vector<std::string> class_names;
  std::vector<ManifestEntry> entries;

  std::size_t size() const { return entries.size(); }
  std::vector<std::size_t> class_counts() const;
};

struct ScanReport {
  Manifest manifest;
  std::vector<std::string> skipped;  // undecodable files left out in lenient mode
};

/**
 * Lists root/<class>/<file> for .jpg/.jpeg/.png files (case-insensitive).
 * Files failing the image signature check raise IoError naming the path,
 * unless lenient is set, in which case they are skipped and reported.
 * Empty class directories are an error.
 */
ScanReport scan_dataset(const std::filesystem::path& root, bool lenient = false);

struct SplitRatios {
  double train = 0.8;
  double val = 0.1;
  double test = 0.1;
};

struct SplitSpec {
  std::uint64_t seed = 42;
  SplitRatios ratios;
  bool stratified = true;
};

struct DatasetSplit {
  Manifest train;
  Manifest val;
  Manifest test;
};

/// Largest-remainder apportionment of n items over three ratios; ties go to
/// the earlier subset.
std::array<std::size_t, 3> apportion(std::size_t n, const SplitRatios& ratios);

/**
 * Deterministic partition. Stratified: each class is shuffled by Fisher-Yates
 * driven by Rng(seed ^ class_index) and cut train/val/test by apportion().
 * Otherwise the whole manifest is shuffled with Rng(seed) and cut once.
 * Subsets keep manifest order (class, then path).
 */
DatasetSplit split_dataset(const Manifest& manifest, const SplitSpec& spec);

/// `path,class,subset` with class names and subset in {train,val,test}.
std::string split_csv(const DatasetSplit& split);
void write_split_csv(const std::filesystem::path& file, const DatasetSplit& split);
/// Rebuilds the three manifests; class list is the sorted set of class names
/// present in the file unless `class_names` is given.
DatasetSplit read_split_csv(const std::filesystem::path& file, const std::filesystem::path& root,
                            const std::vector<std::string>& class_names = {});

/// Random-access samples: an [S, S, 3] image in [0, 255] and a class index.
class SampleSource {
 public:
  virtual ~SampleSource() = default;
  virtual std::size_t size() const = 0;
  virtual std::size_t num_classes() const = 0;
  virtual std::size_t image_size() const = 0;
  virtual std::size_t label(std::size_t i) const = 0;
  virtual Tensor<float> image(std::size_t i) const = 0;
  /// Used in error messages.
  virtual std::string describe(std::size_t i) const { return "sample " + std::to_string(i); }
};

/// Decodes and bilinearly resizes manifest images on demand.
class ImageFolderSource final : public SampleSource {
 public:
  ImageFolderSource(Manifest manifest, std::size_t image_size, bool cache = false);
  std::size_t size() const override { return manifest_.size(); }
  std::size_t num_classes() const override { return manifest_.class_names.size(); }
  std::size_t image_size() const override { return image_size_; }
  std::size_t label(std::size_t i) const override { return manifest_.entries.at(i).class_index; }
  Tensor<float> image(std::size_t i) const override;
  std::string describe(std::size_t i) const override;
  const Manifest& manifest() const { return manifest_; }

 private:
  Manifest manifest_;
  std::size_t image_size_;
  bool cache_;
  mutable std::map<std::size_t, Tensor<float>> cached_;
};

/// In-memory samples, mainly for synthetic data.
class TensorSource final : public SampleSource {
 public:
  TensorSource(std::vector<Tensor<float>> images, std::vector<std::size_t> labels,
               std::size_t num_classes);
  std::size_t size() const override { return images_.size(); }
  std::size_t num_classes() const override { return num_classes_; }
  std::size_t image_size() const override { return images_.front().dim(0); }
  std::size_t label(std::size_t i) const override { return labels_.at(i); }
  Tensor<float> image(std::size_t i) const override { return images_.at(i); }

 private:
  std::vector<Tensor<float>> images_;
  std::vector<std::size_t> labels_;
  std::size_t num_classes_;
};

struct Batch {
  Tensor<float> images;  // [B, S, S, 3], preprocessed
  Tensor<float> onehot;  // [B, K]
  std::vector<std::size_t> indices;
  std::vector<std::size_t> labels;
};

/**
 * Epoch-wise batching. The final short batch is kept. With shuffle on, each
 * epoch permutes the order with Rng(mix_seed(seed ^ epoch)). Augmentation for
 * a sample depends only on (seed, epoch, sample index).
 */
class BatchLoader {
 public:
  BatchLoader(const SampleSource& source, std::size_t batch_size, bool shuffle,
              AugmentPipeline pipeline, std::uint64_t seed);

  std::size_t num_batches() const;
  std::size_t size() const { return source_.size(); }
  void start_epoch(std::size_t epoch);
  Batch batch(std::size_t b) const;
  const std::vector<std::size_t>& order() const { return order_; }
  const SampleSource& source() const { return source_; }

 private:
  const SampleSource& source_;
  std::size_t batch_size_;
  bool shuffle_;
  AugmentPipeline pipeline_;
  std::uint64_t seed_;
  std::size_t epoch_ = 0;
  std::vector<std::size_t> order_;
};

}  // namespace sprout
