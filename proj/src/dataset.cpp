#include "sprout/dataset.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <set>

#include "sprout/csv.hpp"
#include "sprout/image_io.hpp"
#include "sprout/rng.hpp"

namespace fs = std::filesystem;

namespace sprout {

std::vector<std::size_t> Manifest::class_counts() const {
  std::vector<std::size_t> counts(class_names.size(), 0);
  for (const auto& e : entries) ++counts.at(e.class_index);
  return counts;
}

namespace {

bool has_image_extension(const fs::path& p) {
  std::string ext = p.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return ext == ".jpg" || ext == ".jpeg" || ext == ".png";
}

void shuffle_indices(std::vector<std::size_t>& v, Rng& rng) {
  for (std::size_t i = v.size(); i > 1; --i) {
    const std::size_t j = rng.below(static_cast<std::uint32_t>(i));
    std::swap(v[i - 1], v[j]);
  }
}

}  // namespace

ScanReport scan_dataset(const fs::path& root, bool lenient) {
  if (!fs::is_directory(root)) throw IoError("data directory not found: " + root.string());
  ScanReport report;
  Manifest& m = report.manifest;
  m.root = root;
  std::vector<fs::path> class_dirs;
  for (const auto& d : fs::directory_iterator(root)) {
    if (d.is_directory()) class_dirs.push_back(d.path());
  }
  std::sort(class_dirs.begin(), class_dirs.end(),
            [](const fs::path& a, const fs::path& b) { return a.filename().string() < b.filename().string(); });
  if (class_dirs.empty()) throw IoError("no class directories under " + root.string());

  for (const auto& dir : class_dirs) {
    const std::string cls = dir.filename().string();
    std::vector<std::string> files;
    for (const auto& f : fs::directory_iterator(dir)) {
      if (!f.is_regular_file() || !has_image_extension(f.path())) continue;
      const std::string rel = cls + "/" + f.path().filename().string();
      if (!looks_like_image(f.path())) {
        if (!lenient) throw IoError("undecodable image file: " + f.path().string());
        report.skipped.push_back(rel);
        continue;
      }
      files.push_back(rel);
    }
    if (files.empty()) throw IoError("class directory has no images: " + dir.string());
    std::sort(files.begin(), files.end());
    const std::size_t idx = m.class_names.size();
    m.class_names.push_back(cls);
    for (auto& f : files) m.entries.push_back({std::move(f), idx});
  }
  return report;
}

std::array<std::size_t, 3> apportion(std::size_t n, const SplitRatios& r) {
  const std::array<double, 3> ratios{r.train, r.val, r.test};
  double sum = 0.0;
  for (double v : ratios) {
    if (!(v > 0.0)) throw ValueError("split ratios must be positive");
    sum += v;
  }
  if (std::abs(sum - 1.0) > 1e-9) throw ValueError("split ratios must sum to 1");
  std::array<std::size_t, 3> counts{};
  std::array<double, 3> frac{};
  std::size_t assigned = 0;
  for (std::size_t i = 0; i < 3; ++i) {
    const double exact = ratios[i] * static_cast<double>(n);
    // Guard against 0.8 * 10 evaluating to 7.999...
    const double fl = std::floor(exact + 1e-9);
    counts[i] = static_cast<std::size_t>(fl);
    frac[i] = exact - fl;
    assigned += counts[i];
  }
  std::array<std::size_t, 3> order{0, 1, 2};
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return frac[a] > frac[b] + 1e-12; });
  for (std::size_t k = 0; assigned < n; ++k, ++assigned) ++counts[order[k % 3]];
  return counts;
}

DatasetSplit split_dataset(const Manifest& manifest, const SplitSpec& spec) {
  DatasetSplit out;
  for (Manifest* m : {&out.train, &out.val, &out.test}) {
    m->root = manifest.root;
    m->class_names = manifest.class_names;
  }
  std::vector<int> subset_of(manifest.size(), -1);

  auto cut = [&](std::vector<std::size_t>& idx, const std::string& what) {
    const auto counts = apportion(idx.size(), spec.ratios);
    if (counts[0] == 0 || counts[1] == 0 || counts[2] == 0) {
      throw ValueError("split ratios infeasible for " + what + " with " +
                       std::to_string(idx.size()) + " entries");
    }
    std::size_t pos = 0;
    for (int s = 0; s < 3; ++s)
      for (std::size_t k = 0; k < counts[s]; ++k) subset_of[idx[pos++]] = s;
  };

  if (spec.stratified) {
    for (std::size_t c = 0; c < manifest.class_names.size(); ++c) {
      std::vector<std::size_t> idx;
      for (std::size_t i = 0; i < manifest.size(); ++i)
        if (manifest.entries[i].class_index == c) idx.push_back(i);
      Rng rng(spec.seed ^ c);
      shuffle_indices(idx, rng);
      cut(idx, "class '" + manifest.class_names[c] + "'");
    }
  } else {
    std::vector<std::size_t> idx(manifest.size());
    for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
    Rng rng(spec.seed);
    shuffle_indices(idx, rng);
    cut(idx, "the dataset");
  }
  Manifest* targets[3] = {&out.train, &out.val, &out.test};
  for (std::size_t i = 0; i < manifest.size(); ++i) {
    targets[subset_of[i]]->entries.push_back(manifest.entries[i]);
  }
  return out;
}

std::string split_csv(const DatasetSplit& split) {
  std::string out = csv_line({"path", "class", "subset"});
  const std::pair<const Manifest*, const char*> parts[] = {
      {&split.train, "train"}, {&split.val, "val"}, {&split.test, "test"}};
  for (const auto& [m, name] : parts)
    for (const auto& e : m->entries) out += csv_line({e.path, m->class_names.at(e.class_index), name});
  return out;
}

void write_split_csv(const fs::path& file, const DatasetSplit& split) {
  write_file_atomic(file, split_csv(split));
}

DatasetSplit read_split_csv(const fs::path& file, const fs::path& root,
                            const std::vector<std::string>& class_names) {
  const auto rows = parse_csv(read_file(file));
  if (rows.empty() || rows[0] != CsvRow{"path", "class", "subset"}) {
    throw FormatError(file.string() + ": expected header path,class,subset");
  }
  std::vector<std::string> classes = class_names;
  if (classes.empty()) {
    std::set<std::string> names;
    for (std::size_t i = 1; i < rows.size(); ++i) {
      if (rows[i].size() != 3) {
        throw FormatError(file.string() + ": row " + std::to_string(i + 1) + " needs 3 fields");
      }
      names.insert(rows[i][1]);
    }
    classes.assign(names.begin(), names.end());
  }
  DatasetSplit out;
  for (Manifest* m : {&out.train, &out.val, &out.test}) {
    m->root = root;
    m->class_names = classes;
  }
  for (std::size_t i = 1; i < rows.size(); ++i) {
    const auto& r = rows[i];
    if (r.size() != 3) {
      throw FormatError(file.string() + ": row " + std::to_string(i + 1) + " needs 3 fields");
    }
    const auto it = std::find(classes.begin(), classes.end(), r[1]);
    if (it == classes.end()) throw FormatError(file.string() + ": unknown class '" + r[1] + "'");
    const ManifestEntry e{r[0], static_cast<std::size_t>(it - classes.begin())};
    if (r[2] == "train") {
      out.train.entries.push_back(e);
    } else if (r[2] == "val") {
      out.val.entries.push_back(e);
    } else if (r[2] == "test") {
      out.test.entries.push_back(e);
    } else {
      throw FormatError(file.string() + ": unknown subset '" + r[2] + "'");
    }
  }
  return out;
}

ImageFolderSource::ImageFolderSource(Manifest manifest, std::size_t image_size, bool cache)
    : manifest_(std::move(manifest)), image_size_(image_size), cache_(cache) {}

Tensor<float> ImageFolderSource::image(std::size_t i) const {
  if (cache_) {
    if (auto it = cached_.find(i); it != cached_.end()) return it->second;
  }
  auto img = load_image(manifest_.root / manifest_.entries.at(i).path, image_size_);
  if (cache_) cached_.emplace(i, img);
  return img;
}

std::string ImageFolderSource::describe(std::size_t i) const {
  return (manifest_.root / manifest_.entries.at(i).path).string();
}

TensorSource::TensorSource(std::vector<Tensor<float>> images, std::vector<std::size_t> labels,
                           std::size_t num_classes)
    : images_(std::move(images)), labels_(std::move(labels)), num_classes_(num_classes) {
  if (images_.empty() || images_.size() != labels_.size()) {
    throw ValueError("TensorSource needs one label per image and at least one image");
  }
  for (const auto& img : images_) {
    if (img.rank() != 3 || img.dim(0) != img.dim(1) || img.shape() != images_.front().shape()) {
      throw DimensionError("TensorSource images must share one square HxWxC shape");
    }
  }
  for (auto l : labels_)
    if (l >= num_classes_) throw ValueError("label out of range");
}

BatchLoader::BatchLoader(const SampleSource& source, std::size_t batch_size, bool shuffle,
                         AugmentPipeline pipeline, std::uint64_t seed)
    : source_(source),
      batch_size_(batch_size),
      shuffle_(shuffle),
      pipeline_(std::move(pipeline)),
      seed_(seed) {
  if (batch_size == 0) throw ValueError("batch size must be >= 1");
  start_epoch(0);
}

std::size_t BatchLoader::num_batches() const {
  return (source_.size() + batch_size_ - 1) / batch_size_;
}

void BatchLoader::start_epoch(std::size_t epoch) {
  epoch_ = epoch;
  order_.resize(source_.size());
  for (std::size_t i = 0; i < order_.size(); ++i) order_[i] = i;
  if (shuffle_) {
    Rng rng(mix_seed(seed_ ^ epoch));
    shuffle_indices(order_, rng);
  }
}

Batch BatchLoader::batch(std::size_t b) const {
  if (b >= num_batches()) throw ValueError("batch index out of range");
  const std::size_t begin = b * batch_size_;
  const std::size_t end = std::min(source_.size(), begin + batch_size_);
  const std::size_t n = end - begin;
  const std::size_t s = source_.image_size();
  const std::size_t k = source_.num_classes();
  Batch out;
  out.images = Tensor<float>({n, s, s, 3});
  out.onehot = Tensor<float>({n, k});
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t idx = order_[begin + i];
    Tensor<float> img;
    try {
      img = source_.image(idx);
    } catch (const IoError& e) {
      throw IoError(std::string(e.what()) + " (" + source_.describe(idx) + ")");
    }
    if (img.shape() != Shape{s, s, 3}) {
      throw DimensionError(source_.describe(idx) + ": expected " + shape_str({s, s, 3}) + ", got " +
                           shape_str(img.shape()));
    }
    Rng rng(augment_seed(seed_, epoch_, idx));
    const Tensor<float> ready = pipeline_(img, rng);
    std::copy(ready.raw(), ready.raw() + ready.size(), out.images.raw() + i * s * s * 3);
    const std::size_t label = source_.label(idx);
    out.onehot[i * k + label] = 1.0f;
    out.indices.push_back(idx);
    out.labels.push_back(label);
  }
  return out;
}

}  // namespace sprout
