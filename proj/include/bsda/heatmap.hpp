#pragma once

#include <span>

#include "bsda/field.hpp"
#include "bsda/mask.hpp"

namespace bsda {

struct HeatmapParams {
  double sigma = 2.0;
  /// Absolute cut-off applied to the composed field before normalisation.
  double floor = 0.001;

  void validate() const;
};

/// Isotropic Gaussian density (1 / 2 pi sigma^2) exp(-|x - c|^2 / 2 sigma^2)
/// sampled at integer pixel centres.
ScalarField gaussian_field(Pixel center, double sigma, int height, int width);

/// Probabilistic union 1 - prod_k (1 - field_k), folded in list order.
/// Inputs must share dims and lie in [0, 1].
ScalarField heatsum(std::span<const ScalarField> fields);

/// Heatsum of one Gaussian per boundary point, before thresholding. Produces
/// the same values as heatsum(gaussian_field(c) for c in boundary).
ScalarField compose_boundary_gaussians(const BoundarySet& boundary, double sigma);

/// Soft boundary target: composed Gaussians, values below params.floor set to
/// zero, then divided by the maximum. Throws EmptyForeground on an empty mask.
ScalarField boundary_heatmap(const BinaryMask& mask, const HeatmapParams& params = {});

}  // namespace bsda
