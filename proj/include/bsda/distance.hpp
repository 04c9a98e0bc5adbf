#pragma once

#include "bsda/field.hpp"
#include "bsda/mask.hpp"

namespace bsda {

enum class PassOrder { RowsFirst, ColumnsFirst };

/// Exact Euclidean distance from every pixel centre to the nearest foreground
/// pixel of `feature`. Separable lower-envelope-of-parabolas method, linear in
/// the pixel count. Throws EmptyFeatureSet when `feature` has no foreground.
ScalarField edt(const BinaryMask& feature, PassOrder order = PassOrder::ColumnsFirst);

/// Squared variant of edt; values are exact integers.
ScalarField edt_squared(const BinaryMask& feature, PassOrder order = PassOrder::ColumnsFirst);

/// Signed distance to the inner boundary: negative inside, zero on the
/// boundary, positive outside. Throws EmptyForeground for an empty mask.
ScalarField compute_sdm(const BinaryMask& mask);

/// Scales negative values by the largest magnitude below zero and positive
/// values by the largest value above zero, giving a field in [-1, 1].
ScalarField normalize_sdm(const ScalarField& sdm);

/// O(N * |boundary|) reference for compute_sdm.
ScalarField brute_force_sdm(const BinaryMask& mask);

}  // namespace bsda
