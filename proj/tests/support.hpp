#pragma once

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

#include "sprout/image_io.hpp"
#include "sprout/rng.hpp"
#include "sprout/tensor.hpp"

namespace sprout::test {

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  TempDir() {
    std::string tmpl = (std::filesystem::temp_directory_path() / "sprout-XXXXXX").string();
    if (!::mkdtemp(tmpl.data())) throw std::runtime_error("mkdtemp failed");
    path_ = tmpl;
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& s) const { return path_ / s; }

 private:
  std::filesystem::path path_;
};

template <typename T>
Tensor<T> random_tensor(Shape shape, std::uint64_t seed, double lo = -1.0, double hi = 1.0) {
  Rng rng(seed);
  Tensor<T> t(std::move(shape));
  for (auto& v : t.data()) v = static_cast<T>(rng.uniform(lo, hi));
  return t;
}

/// Uniform random values whose magnitude stays in [lo, hi] with random sign.
template <typename T>
Tensor<T> random_away_from_zero(Shape shape, std::uint64_t seed, double lo, double hi) {
  Rng rng(seed);
  Tensor<T> t(std::move(shape));
  for (auto& v : t.data()) {
    const double m = rng.uniform(lo, hi);
    v = static_cast<T>(rng.coin() ? m : -m);
  }
  return t;
}

/// A class-dependent pattern (stripes whose orientation and color depend on the
/// class) with per-image noise, values in [0, 255].
inline Tensor<float> synthetic_image(std::size_t cls, std::size_t variant, std::size_t size) {
  Rng rng(mix_seed(cls * 1000 + variant + 1));
  Tensor<float> img({size, size, 3});
  const double freq = 1.0 + static_cast<double>(cls % 4);
  const int orient = static_cast<int>(cls % 3);
  for (std::size_t y = 0; y < size; ++y)
    for (std::size_t x = 0; x < size; ++x) {
      double u = orient == 0 ? x : orient == 1 ? y : (x + y) / 2.0;
      const double wave = 0.5 + 0.5 * std::sin(2.0 * M_PI * freq * u / static_cast<double>(size));
      for (std::size_t c = 0; c < 3; ++c) {
        const double tint = ((cls + c) % 3 == 0) ? 1.0 : 0.45;
        const double v = 255.0 * tint * wave + rng.uniform(-12.0, 12.0);
        img[(y * size + x) * 3 + c] = static_cast<float>(std::round(std::clamp(v, 0.0, 255.0)));
      }
    }
  return img;
}

/// root/<class_k>/img_<i>.png for k < classes, i < per_class.
inline std::vector<std::string> write_image_tree(const std::filesystem::path& root,
                                                 std::size_t classes, std::size_t per_class,
                                                 std::size_t size) {
  std::vector<std::string> names;
  for (std::size_t k = 0; k < classes; ++k) {
    const std::string name = "class_" + std::string(1, static_cast<char>('a' + k));
    names.push_back(name);
    std::filesystem::create_directories(root / name);
    for (std::size_t i = 0; i < per_class; ++i) {
      write_png(root / name / ("img_" + std::to_string(100 + i) + ".png"),
                synthetic_image(k, i, size));
    }
  }
  return names;
}

}  // namespace sprout::test
