#pragma once

#include <cstdint>
#include <optional>

#include "sprout/rng.hpp"
#include "sprout/tensor.hpp"

namespace sprout {

enum class ShearUnit { degrees, radians };

/// Stochastic geometric augmentation ranges plus the final rescale factor.
struct AugmentPolicy {
  double rescale = 1.0 / 255.0;
  double rotation_range_deg = 20.0;
  double width_shift_frac = 0.2;
  double height_shift_frac = 0.2;
  /// Interpreted in `shear_unit`; the default 0.2 degrees is nearly a no-op.
  double shear_range = 0.2;
  ShearUnit shear_unit = ShearUnit::degrees;
  double zoom_range = 0.2;
  bool horizontal_flip = true;

  /// Throws ValueError for negative ranges or zoom_range >= 1.
  void validate() const;
  /// All ranges zero and no flip.
  static AugmentPolicy identity();
};

/// One concrete transform. Offsets are in pixels, zoom factors multiply
/// content size (zx > 1 enlarges), angles are degrees.
struct AffineParams {
  double theta_deg = 0.0;
  double shear_deg = 0.0;
  double tx = 0.0;
  double ty = 0.0;
  double zx = 1.0;
  double zy = 1.0;
  bool flip = false;

  bool is_identity() const;
  friend bool operator==(const AffineParams&, const AffineParams&) = default;
};

/**
 * Draws exactly seven values in the order theta, tx, ty, shear, zx, zy, flip.
 * Every field consumes its draw even when its range is zero or flipping is
 * disabled, so the stream position never depends on the policy.
 */
AffineParams sample_augment_params(Rng& rng, const AugmentPolicy& policy, std::size_t height,
                                   std::size_t width);

/**
 * Applies flip (column reversal) first, then the affine map about the image
 * center composed as rotation . shear . zoom . translation. Each output pixel
 * is inverse-mapped and sampled with nearest neighbour; coordinates outside
 * the image clamp to the nearest edge. image is [H, W, C].
 */
Tensor<float> apply_affine(const Tensor<float>& image, const AffineParams& params);

/// Multiplies every value by `factor` (default 1/255).
Tensor<float> rescale(const Tensor<float>& image, double factor = 1.0 / 255.0);

/**
 * Per-subset preprocessing: training applies the random geometric policy and
 * then rescale; validation and test apply rescale only.
 */
class AugmentPipeline {
 public:
  static AugmentPipeline training(AugmentPolicy policy);
  static AugmentPipeline evaluation(double rescale_factor = 1.0 / 255.0);

  bool augments() const { return policy_.has_value(); }
  const std::optional<AugmentPolicy>& policy() const { return policy_; }
  double rescale_factor() const { return rescale_factor_; }

  /// image in [0, 255]; rng is consumed only when augmenting.
  Tensor<float> operator()(const Tensor<float>& image, Rng& rng) const;

 private:
  AugmentPipeline(std::optional<AugmentPolicy> policy, double factor)
      : policy_(std::move(policy)), rescale_factor_(factor) {}

  std::optional<AugmentPolicy> policy_;
  double rescale_factor_;
};

/// Seed for the augmentation of one sample in one epoch; independent of the
/// order in which samples are processed.
std::uint64_t augment_seed(std::uint64_t base, std::uint64_t epoch, std::uint64_t ordinal);

}  // namespace sprout
