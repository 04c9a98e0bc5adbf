#pragma once

#include <random>

#include "bsda/field.hpp"
#include "bsda/mask.hpp"

namespace bsda {

/// Right-angle rotation followed by optional flips. Applied identically to an
/// image, its mask and any target fields.
struct GeometricTransform {
  /// Counter-clockwise quarter turns, 0..3.
  int quarter_turns = 0;
  bool flip_horizontal = false;
  bool flip_vertical = false;

  bool identity() const noexcept { return quarter_turns % 4 == 0 && !flip_horizontal && !flip_vertical; }
};

struct AugmentPlan {
  GeometricTransform geometry;
  /// Multiplies deviations from the image mean.
  double contrast = 1.0;
  double noise_sigma = 0.0;
  bool blur = false;
};

/// Rotation uniform over {0, 90, 180, 270} degrees, each flip with
/// probability 1/2, contrast U(0.8, 1.2), noise sigma U(0, 0.05), 3x3 box blur
/// with probability 0.2.
AugmentPlan draw_augment(std::mt19937_64& rng);

ScalarField apply_geometry(const ScalarField& field, const GeometricTransform& t);
BinaryMask apply_geometry(const BinaryMask& mask, const GeometricTransform& t);

/// Contrast, Gaussian noise and blur, clamped to [0, 1]. Draws the noise from rng.
ScalarField apply_intensity(const ScalarField& image, const AugmentPlan& plan, std::mt19937_64& rng);

struct AugmentedPair {
  ScalarField image;
  BinaryMask mask;
};

AugmentedPair augment(const ScalarField& image, const BinaryMask& mask, std::mt19937_64& rng);

}  // namespace bsda
