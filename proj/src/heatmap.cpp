#include "bsda/heatmap.hpp"

#include <cmath>
#include <numbers>
#include <string>

#include "bsda/error.hpp"

namespace bsda {

namespace {

double gaussian_peak(double sigma) { return 1.0 / (2.0 * std::numbers::pi * sigma * sigma); }

double gaussian_at(int row, int col, Pixel center, double peak, double inv_two_var) {
  const double dr = row - center.row;
  const double dc = col - center.col;
  return peak * std::exp(-(dr * dr + dc * dc) * inv_two_var);
}

void check_sigma(double sigma) {
  if (!(sigma > 0.0) || !std::isfinite(sigma)) {
    throw Error(Errc::InvalidSigma, "sigma must be positive, got " + std::to_string(sigma));
  }
}

}  // namespace

void HeatmapParams::validate() const {
  check_sigma(sigma);
  if (!(floor >= 0.0) || !std::isfinite(floor)) {
    throw Error(Errc::ValueOutOfRange, "floor must be non-negative, got " + std::to_string(floor));
  }
}

ScalarField gaussian_field(Pixel center, double sigma, int height, int width) {
  check_sigma(sigma);
  if (center.row < 0 || center.col < 0 || center.row >= height || center.col >= width) {
    throw Error(Errc::DimMismatch, "gaussian centre outside the field");
  }
  const double peak = gaussian_peak(sigma);
  const double inv_two_var = 1.0 / (2.0 * sigma * sigma);
  ScalarField out(height, width);
  for (int r = 0; r < height; ++r) {
    for (int c = 0; c < width; ++c) out.at(r, c) = gaussian_at(r, c, center, peak, inv_two_var);
  }
  return out;
}

ScalarField heatsum(std::span<const ScalarField> fields) {
  if (fields.empty()) throw Error(Errc::EmptyList, "heatsum of no fields");
  const int h = fields.front().height();
  const int w = fields.front().width();
  for (const auto& f : fields) {
    if (f.height() != h || f.width() != w) throw Error(Errc::DimMismatch, "heatsum inputs differ in dims");
    for (double v : f.values()) {
      if (!(v >= 0.0 && v <= 1.0)) {
        throw Error(Errc::ValueOutOfRange, "heatsum input " + std::to_string(v) + " outside [0, 1]");
      }
    }
  }
  ScalarField out(h, w);
  auto acc = out.values();
  for (std::size_t i = 0; i < acc.size(); ++i) {
    // a + b - ab keeps an all-zero field an exact identity
    double v = 0.0;
    for (const auto& f : fields) v = v + f.values()[i] - v * f.values()[i];
    acc[i] = v;
  }
  return out;
}

ScalarField compose_boundary_gaussians(const BoundarySet& boundary, double sigma) {
  check_sigma(sigma);
  const double peak = gaussian_peak(sigma);
  if (peak > 1.0) {
    throw Error(Errc::ValueOutOfRange, "sigma " + std::to_string(sigma) + " gives a Gaussian peak above 1");
  }
  const double inv_two_var = 1.0 / (2.0 * sigma * sigma);
  ScalarField out(boundary.height(), boundary.width());
  const auto points = boundary.points();
  for (int r = 0; r < boundary.height(); ++r) {
    for (int c = 0; c < boundary.width(); ++c) {
      double keep = 1.0;
      for (const auto& p : points) keep *= 1.0 - gaussian_at(r, c, p, peak, inv_two_var);
      out.at(r, c) = 1.0 - keep;
    }
  }
  return out;
}

ScalarField boundary_heatmap(const BinaryMask& mask, const HeatmapParams& params) {
  params.validate();
  if (mask.count() == 0) throw Error(Errc::EmptyForeground, "boundary heatmap of an empty mask");
  ScalarField field = compose_boundary_gaussians(extract_boundary(mask), params.sigma);
  double peak = 0.0;
  for (double& v : field.values()) {
    if (v < params.floor) v = 0.0;
    peak = std::max(peak, v);
  }
  if (peak > 0.0) {
    for (double& v : field.values()) v /= peak;
  }
  field.set_kind(FieldKind::Heatmap);
  return field;
}

}  // namespace bsda
