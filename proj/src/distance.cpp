#include "bsda/distance.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "bsda/error.hpp"

namespace bsda {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// One-dimensional squared distance transform of a sampled function, computed
// as the lower envelope of parabolas rooted at the finite samples. Sites with
// f = inf contribute no parabola. Output is inf when no site is finite.
class EnvelopeScratch {
 public:
  void transform(std::span<const double> f, std::span<double> out) {
    const int n = static_cast<int>(f.size());
    sites_.resize(static_cast<std::size_t>(n));
    bounds_.resize(static_cast<std::size_t>(n) + 1);
    int k = -1;
    for (int q = 0; q < n; ++q) {
      if (!std::isfinite(f[q])) continue;
      if (k < 0) {
        k = 0;
        sites_[0] = q;
        bounds_[0] = -kInf;
        bounds_[1] = kInf;
        continue;
      }
      // bounds_[0] is -inf, so the scan always stops at k >= 0.
      double s = intersect(f, q, sites_[k]);
      while (s <= bounds_[k]) {
        --k;
        s = intersect(f, q, sites_[k]);
      }
      ++k;
      sites_[k] = q;
      bounds_[k] = s;
      bounds_[k + 1] = kInf;
    }
    if (k < 0) {
      std::fill(out.begin(), out.end(), kInf);
      return;
    }
    int j = 0;
    for (int q = 0; q < n; ++q) {
      while (bounds_[j + 1] < q) ++j;
      const double d = q - sites_[j];
      out[q] = d * d + f[sites_[j]];
    }
  }

 private:
  static double intersect(std::span<const double> f, int q, int v) {
    return ((f[q] + static_cast<double>(q) * q) - (f[v] + static_cast<double>(v) * v)) /
           (2.0 * (q - v));
  }

  std::vector<int> sites_;
  std::vector<double> bounds_;
};

void transform_columns(std::vector<double>& grid, int height, int width, EnvelopeScratch& scratch) {
  std::vector<double> line(static_cast<std::size_t>(height));
  std::vector<double> out(static_cast<std::size_t>(height));
  for (int c = 0; c < width; ++c) {
    for (int r = 0; r < height; ++r) line[r] = grid[static_cast<std::size_t>(r) * width + c];
    scratch.transform(line, out);
    for (int r = 0; r < height; ++r) grid[static_cast<std::size_t>(r) * width + c] = out[r];
  }
}

void transform_rows(std::vector<double>& grid, int height, int width, EnvelopeScratch& scratch) {
  std::vector<double> out(static_cast<std::size_t>(width));
  for (int r = 0; r < height; ++r) {
    std::span<double> row(grid.data() + static_cast<std::size_t>(r) * width,
                          static_cast<std::size_t>(width));
    scratch.transform(row, out);
    std::copy(out.begin(), out.end(), row.begin());
  }
}

ScalarField signed_from_distance(const BinaryMask& mask, const MaskPartition& parts,
                                 const ScalarField& distance) {
  ScalarField sdm(mask.height(), mask.width(), FieldKind::RawSdm);
  for (const auto& p : parts.interior) sdm.at(p.row, p.col) = -distance.at(p.row, p.col);
  for (const auto& p : parts.exterior) sdm.at(p.row, p.col) = distance.at(p.row, p.col);
  for (const auto& p : parts.boundary.points()) sdm.at(p.row, p.col) = 0.0;
  return sdm;
}

}  // namespace

ScalarField edt_squared(const BinaryMask& feature, PassOrder order) {
  if (feature.count() == 0) throw Error(Errc::EmptyFeatureSet, "edt needs at least one feature pixel");
  const int h = feature.height();
  const int w = feature.width();
  std::vector<double> grid(feature.size());
  const auto cells = feature.cells();
  for (std::size_t i = 0; i < grid.size(); ++i) grid[i] = cells[i] ? 0.0 : kInf;

  EnvelopeScratch scratch;
  if (order == PassOrder::ColumnsFirst) {
    transform_columns(grid, h, w, scratch);
    transform_rows(grid, h, w, scratch);
  } else {
    transform_rows(grid, h, w, scratch);
    transform_columns(grid, h, w, scratch);
  }
  return ScalarField(h, w, std::move(grid));
}

ScalarField edt(const BinaryMask& feature, PassOrder order) {
  ScalarField field = edt_squared(feature, order);
  for (double& v : field.values()) v = std::sqrt(v);
  return field;
}

ScalarField compute_sdm(const BinaryMask& mask) {
  if (mask.count() == 0) throw Error(Errc::EmptyForeground, "signed distance map of an empty mask");
  const MaskPartition parts = partition(mask);
  return signed_from_distance(mask, parts, edt(parts.boundary.to_mask()));
}

ScalarField normalize_sdm(const ScalarField& sdm) {
  double neg_max = 0.0;
  double pos_max = 0.0;
  for (double v : sdm.values()) {
    if (v < 0.0) neg_max = std::max(neg_max, -v);
    if (v > 0.0) pos_max = std::max(pos_max, v);
  }
  ScalarField out = sdm;
  out.set_kind(FieldKind::NormalizedSdm);
  for (double& v : out.values()) {
    if (v < 0.0) {
      v /= neg_max;
    } else if (v > 0.0) {
      v /= pos_max;
    }
  }
  return out;
}

ScalarField brute_force_sdm(const BinaryMask& mask) {
  if (mask.count() == 0) throw Error(Errc::EmptyForeground, "signed distance map of an empty mask");
  const MaskPartition parts = partition(mask);
  const auto boundary = parts.boundary.points();
  ScalarField distance(mask.height(), mask.width());
  for (int r = 0; r < mask.height(); ++r) {
    for (int c = 0; c < mask.width(); ++c) {
      double best = kInf;
      for (const auto& b : boundary) {
        const double dr = r - b.row;
        const double dc = c - b.col;
        best = std::min(best, dr * dr + dc * dc);
      }
      distance.at(r, c) = std::sqrt(best);
    }
  }
  return signed_from_distance(mask, parts, distance);
}

}  // namespace bsda
