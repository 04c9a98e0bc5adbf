#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <random>
#include <string>
#include <string_view>
#include <vector>

#include "bsda/dataset.hpp"
#include "bsda/field.hpp"
#include "bsda/mask.hpp"

namespace bsda {

enum class FazClass { Normal = 0, EnlargedIrregular = 1, Reduced = 2 };

inline constexpr int kFazClasses = 3;

std::string_view class_name(FazClass c) noexcept;
/// Throws FormatError for an unknown name.
FazClass parse_class(std::string_view name);

/// Radius range as fractions of the image size and the boundary perturbation
/// amplitude of one class.
struct ShapeRange {
  double radius_min = 0.0;
  double radius_max = 0.0;
  double amplitude = 0.0;

  bool operator==(const ShapeRange&) const = default;
};

struct SynthConfig {
  int image_size = 64;
  int n_per_class = 100;
  /// Indexed by FazClass.
  std::array<ShapeRange, kFazClasses> shapes{{{0.12, 0.18, 0.08}, {0.22, 0.30, 0.25}, {0.06, 0.10, 0.08}}};
  /// Half-range of the background texture around its 0.6 mean.
  double texture_amplitude = 0.2;
  std::uint64_t seed = 0;

  /// Throws ConfigInvalid.
  void validate() const;
  bool operator==(const SynthConfig&) const = default;
};

struct SynthSample {
  ScalarField image;
  BinaryMask mask;
  FazClass label;
};

/// Star-convex region r(t) = r0 (1 + a sum_k b_k cos(k t + phi_k)), k = 1..5,
/// about a jittered centre, drawn as a dark blob on a textured background.
/// Retries up to 10 times when the raster is too small or one-sided, then
/// throws DegenerateShape.
SynthSample gen_sample(FazClass label, std::mt19937_64& rng, const SynthConfig& config);

/// Generator for one sample id, independent of every other id.
std::mt19937_64 sample_rng(std::uint64_t seed, int id);

struct ManifestRow {
  std::string id;
  FazClass label;
  Split split;
};

/// Ids, labels and the stratified 70/10/20 train/val/test assignment.
std::vector<ManifestRow> plan_dataset(const SynthConfig& config);
/// Regenerates a single manifest row's sample.
SynthSample gen_row(const ManifestRow& row, int index, const SynthConfig& config);

/// Writes images/<id>.pgm, masks/<id>.pgm, manifest.csv and config.json.
void gen_dataset(const SynthConfig& config, const std::filesystem::path& out);

struct ShapeFeatures {
  double area = 0.0;
  /// Length of the marching-squares contour at level 0.5.
  double perimeter = 0.0;
  /// 4 pi area / perimeter^2.
  double compactness = 0.0;
};

ShapeFeatures shape_features(const BinaryMask& mask);

}  // namespace bsda
