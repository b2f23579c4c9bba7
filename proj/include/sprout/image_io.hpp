#pragma once

#include <filesystem>

#include "sprout/tensor.hpp"

namespace sprout {

/// Decodes a JPEG/PNG into an 8-bit RGB image stored as [H, W, 3] floats in
/// [0, 255]. Throws IoError naming the path on failure.
Tensor<float> decode_image(const std::filesystem::path& path);

/// Bilinear resize of an [H, W, C] image (values kept in [0, 255]).
Tensor<float> resize_bilinear(const Tensor<float>& image, std::size_t height, std::size_t width);

/// decode_image followed by resize_bilinear to size x size.
Tensor<float> load_image(const std::filesystem::path& path, std::size_t size);

/// Writes an [H, W, 1|3] image in [0, 255] as 8-bit PNG.
void write_png(const std::filesystem::path& path, const Tensor<float>& image);

/// Cheap signature check (PNG or JPEG magic bytes).
bool looks_like_image(const std::filesystem::path& path);

}  // namespace sprout
