#include "sprout/augment.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace sprout {

void AugmentPolicy::validate() const {
  if (rotation_range_deg < 0 || width_shift_frac < 0 || height_shift_frac < 0 ||
      shear_range < 0 || zoom_range < 0) {
    throw ValueError("augmentation ranges must be non-negative");
  }
  if (zoom_range >= 1.0) throw ValueError("zoom range must be below 1");
  if (!(rescale > 0.0)) throw ValueError("rescale factor must be positive");
}

AugmentPolicy AugmentPolicy::identity() {
  AugmentPolicy p;
  p.rotation_range_deg = 0;
  p.width_shift_frac = 0;
  p.height_shift_frac = 0;
  p.shear_range = 0;
  p.zoom_range = 0;
  p.horizontal_flip = false;
  return p;
}

bool AffineParams::is_identity() const {
  return theta_deg == 0 && shear_deg == 0 && tx == 0 && ty == 0 && zx == 1 && zy == 1 && !flip;
}

AffineParams sample_augment_params(Rng& rng, const AugmentPolicy& policy, std::size_t height,
                                   std::size_t width) {
  policy.validate();
  AffineParams p;
  const double rot = policy.rotation_range_deg;
  p.theta_deg = rng.uniform(-rot, rot);
  p.tx = rng.uniform(-policy.width_shift_frac, policy.width_shift_frac) * static_cast<double>(width);
  p.ty = rng.uniform(-policy.height_shift_frac, policy.height_shift_frac) *
         static_cast<double>(height);
  const double shear = rng.uniform(-policy.shear_range, policy.shear_range);
  p.shear_deg = policy.shear_unit == ShearUnit::degrees ? shear : shear * 180.0 / std::numbers::pi;
  p.zx = rng.uniform(1.0 - policy.zoom_range, 1.0 + policy.zoom_range);
  p.zy = rng.uniform(1.0 - policy.zoom_range, 1.0 + policy.zoom_range);
  const bool coin = rng.coin();
  p.flip = policy.horizontal_flip && coin;
  return p;
}

Tensor<float> apply_affine(const Tensor<float>& image, const AffineParams& params) {
  if (image.rank() != 3) {
    throw DimensionError("apply_affine expects an HxWxC image, got " + shape_str(image.shape()));
  }
  const std::size_t h = image.dim(0), w = image.dim(1), c = image.dim(2);

  Tensor<float> src = image;
  if (params.flip) {
    for (std::size_t r = 0; r < h; ++r)
      for (std::size_t col = 0; col < w / 2; ++col) {
        float* a = src.raw() + (r * w + col) * c;
        float* b = src.raw() + (r * w + (w - 1 - col)) * c;
        std::swap_ranges(a, a + c, b);
      }
  }
  AffineParams geo = params;
  geo.flip = false;
  if (geo.is_identity()) return src;

  // Forward map on centered (x = col, y = row) coordinates: q = A (p + t),
  // A = R * S * Z. Output pixels are pulled from p = A^-1 q - t.
  const double th = params.theta_deg * std::numbers::pi / 180.0;
  const double sh = params.shear_deg * std::numbers::pi / 180.0;
  const double r00 = std::cos(th), r01 = std::sin(th), r10 = -std::sin(th), r11 = std::cos(th);
  const double s00 = 1.0, s01 = -std::sin(sh), s10 = 0.0, s11 = std::cos(sh);
  // R * S
  const double rs00 = r00 * s00 + r01 * s10, rs01 = r00 * s01 + r01 * s11;
  const double rs10 = r10 * s00 + r11 * s10, rs11 = r10 * s01 + r11 * s11;
  // (R * S) * Z
  const double a00 = rs00 * params.zx, a01 = rs01 * params.zy;
  const double a10 = rs10 * params.zx, a11 = rs11 * params.zy;
  const double det = a00 * a11 - a01 * a10;
  if (std::abs(det) < 1e-12) throw ValueError("degenerate affine transform");
  const double i00 = a11 / det, i01 = -a01 / det, i10 = -a10 / det, i11 = a00 / det;

  const double cx = (static_cast<double>(w) - 1.0) / 2.0;
  const double cy = (static_cast<double>(h) - 1.0) / 2.0;
  Tensor<float> out(image.shape());
  for (std::size_t r = 0; r < h; ++r) {
    const double qy = static_cast<double>(r) - cy;
    for (std::size_t col = 0; col < w; ++col) {
      const double qx = static_cast<double>(col) - cx;
      const double px = i00 * qx + i01 * qy - params.tx;
      const double py = i10 * qx + i11 * qy - params.ty;
      const double sx = std::floor(px + cx + 0.5);
      const double sy = std::floor(py + cy + 0.5);
      const auto ix = static_cast<std::size_t>(std::clamp(sx, 0.0, static_cast<double>(w - 1)));
      const auto iy = static_cast<std::size_t>(std::clamp(sy, 0.0, static_cast<double>(h - 1)));
      const float* from = src.raw() + (iy * w + ix) * c;
      std::copy(from, from + c, out.raw() + (r * w + col) * c);
    }
  }
  return out;
}

Tensor<float> rescale(const Tensor<float>& image, double factor) {
  Tensor<float> out(image.shape());
  for (std::size_t i = 0; i < image.size(); ++i) {
    out[i] = static_cast<float>(static_cast<double>(image[i]) * factor);
  }
  return out;
}

AugmentPipeline AugmentPipeline::training(AugmentPolicy policy) {
  policy.validate();
  const double f = policy.rescale;
  return AugmentPipeline(std::move(policy), f);
}

AugmentPipeline AugmentPipeline::evaluation(double rescale_factor) {
  return AugmentPipeline(std::nullopt, rescale_factor);
}

Tensor<float> AugmentPipeline::operator()(const Tensor<float>& image, Rng& rng) const {
  if (!policy_) return rescale(image, rescale_factor_);
  const auto params = sample_augment_params(rng, *policy_, image.dim(0), image.dim(1));
  return rescale(apply_affine(image, params), rescale_factor_);
}

std::uint64_t augment_seed(std::uint64_t base, std::uint64_t epoch, std::uint64_t ordinal) {
  return mix_seed(mix_seed(base ^ ordinal) ^ epoch);
}

}  // namespace sprout
