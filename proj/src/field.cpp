#include "bsda/field.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "bsda/error.hpp"

namespace bsda {

namespace {

void check_dims(int height, int width, std::size_t n) {
  if (height < 1 || width < 1) throw Error(Errc::DimMismatch, "field dims must be positive");
  if (n != static_cast<std::size_t>(height) * static_cast<std::size_t>(width)) {
    throw Error(Errc::DimMismatch, "value count does not match dims");
  }
}

}  // namespace

ScalarField::ScalarField(int height, int width, FieldKind kind, double fill)
    : height_(height), width_(width), kind_(kind) {
  check_dims(height, width, static_cast<std::size_t>(std::max(height, 0)) * std::max(width, 0));
  values_.assign(static_cast<std::size_t>(height) * static_cast<std::size_t>(width), fill);
}

ScalarField::ScalarField(int height, int width, std::vector<double> values, FieldKind kind)
    : height_(height), width_(width), values_(std::move(values)), kind_(kind) {
  check_dims(height, width, values_.size());
}

double ScalarField::min() const { return *std::min_element(values_.begin(), values_.end()); }

double ScalarField::max() const { return *std::max_element(values_.begin(), values_.end()); }

void ScalarField::validate() const {
  double lo = -INFINITY;
  double hi = INFINITY;
  switch (kind_) {
    case FieldKind::NormalizedSdm: lo = -1.0; hi = 1.0; break;
    case FieldKind::Heatmap:
    case FieldKind::Probability: lo = 0.0; hi = 1.0; break;
    case FieldKind::RawSdm:
    case FieldKind::Other: break;
  }
  for (std::size_t i = 0; i < values_.size(); ++i) {
    const double v = values_[i];
    if (!std::isfinite(v) || v < lo || v > hi) {
      throw Error(Errc::ValueOutOfRange,
                  "field value " + std::to_string(v) + " at index " + std::to_string(i));
    }
  }
}

}  // namespace bsda
