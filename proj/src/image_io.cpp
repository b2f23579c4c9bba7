#include "sprout/image_io.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>

#include <opencv2/core.hpp>
#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>

namespace sprout {

namespace {

cv::Mat to_u8_mat(const Tensor<float>& image) {
  if (image.rank() != 3 || (image.dim(2) != 1 && image.dim(2) != 3)) {
    throw DimensionError("expected an HxWx1 or HxWx3 image, got " + shape_str(image.shape()));
  }
  const int h = static_cast<int>(image.dim(0)), w = static_cast<int>(image.dim(1));
  const int c = static_cast<int>(image.dim(2));
  cv::Mat m(h, w, c == 3 ? CV_8UC3 : CV_8UC1);
  for (int r = 0; r < h; ++r) {
    auto* row = m.ptr<std::uint8_t>(r);
    for (int i = 0; i < w * c; ++i) {
      const float v = image[static_cast<std::size_t>(r) * w * c + i];
      row[i] = static_cast<std::uint8_t>(std::clamp(std::lround(v), 0L, 255L));
    }
  }
  if (c == 3) cv::cvtColor(m, m, cv::COLOR_RGB2BGR);
  return m;
}

Tensor<float> from_u8_mat(const cv::Mat& m) {
  const std::size_t h = m.rows, w = m.cols, c = m.channels();
  Tensor<float> out({h, w, c});
  for (std::size_t r = 0; r < h; ++r) {
    const auto* row = m.ptr<std::uint8_t>(static_cast<int>(r));
    for (std::size_t i = 0; i < w * c; ++i) out[r * w * c + i] = row[i];
  }
  return out;
}

}  // namespace

Tensor<float> decode_image(const std::filesystem::path& path) {
  cv::Mat bgr;
  try {
    bgr = cv::imread(path.string(), cv::IMREAD_COLOR);
  } catch (const cv::Exception& e) {
    throw IoError("cannot decode image " + path.string() + ": " + e.what());
  }
  if (bgr.empty()) throw IoError("cannot decode image " + path.string());
  cv::Mat rgb;
  cv::cvtColor(bgr, rgb, cv::COLOR_BGR2RGB);
  return from_u8_mat(rgb);
}

Tensor<float> resize_bilinear(const Tensor<float>& image, std::size_t height, std::size_t width) {
  if (image.rank() != 3) throw DimensionError("resize expects HxWxC, got " + shape_str(image.shape()));
  if (image.dim(0) == height && image.dim(1) == width) return image;
  const int c = static_cast<int>(image.dim(2));
  cv::Mat src(static_cast<int>(image.dim(0)), static_cast<int>(image.dim(1)), CV_32FC(c),
              const_cast<float*>(image.raw()));
  cv::Mat dst;
  cv::resize(src, dst, cv::Size(static_cast<int>(width), static_cast<int>(height)), 0, 0,
             cv::INTER_LINEAR);
  Tensor<float> out({height, width, image.dim(2)});
  for (std::size_t r = 0; r < height; ++r) {
    const float* row = dst.ptr<float>(static_cast<int>(r));
    std::copy(row, row + width * image.dim(2), out.raw() + r * width * image.dim(2));
  }
  return out;
}

Tensor<float> load_image(const std::filesystem::path& path, std::size_t size) {
  return resize_bilinear(decode_image(path), size, size);
}

void write_png(const std::filesystem::path& path, const Tensor<float>& image) {
  const cv::Mat m = to_u8_mat(image);
  bool ok = false;
  try {
    ok = cv::imwrite(path.string(), m);
  } catch (const cv::Exception& e) {
    throw IoError("cannot write " + path.string() + ": " + e.what());
  }
  if (!ok) throw IoError("cannot write " + path.string());
}

bool looks_like_image(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::array<unsigned char, 8> magic{};
  in.read(reinterpret_cast<char*>(magic.data()), magic.size());
  if (in.gcount() < 3) return false;
  static constexpr std::array<unsigned char, 8> png{0x89, 'P', 'N', 'G', 0x0D, 0x0A, 0x1A, 0x0A};
  if (in.gcount() == 8 && magic == png) return true;
  return magic[0] == 0xFF && magic[1] == 0xD8 && magic[2] == 0xFF;
}

}  // namespace sprout
