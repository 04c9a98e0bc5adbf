#pragma once

// Shared test helpers: random inputs and brute-force oracles written
// independently of the library code they check.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <span>
#include <utility>
#include <vector>

#include "bsda/field.hpp"
#include "bsda/mask.hpp"

namespace bsda::test {

inline BinaryMask random_mask(int h, int w, double density, std::mt19937_64& rng) {
  std::bernoulli_distribution coin(density);
  BinaryMask m(h, w);
  for (int r = 0; r < h; ++r) {
    for (int c = 0; c < w; ++c) m.set(r, c, coin(rng));
  }
  return m;
}

/// Random filled blob (union of discs), with at least one foreground pixel.
inline BinaryMask random_blob(int h, int w, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> ux(0.0, w - 1.0);
  std::uniform_real_distribution<double> uy(0.0, h - 1.0);
  std::uniform_real_distribution<double> ur(1.0, std::max(1.5, std::min(h, w) / 4.0));
  std::uniform_int_distribution<int> count(1, 3);
  BinaryMask m(h, w);
  const int discs = count(rng);
  for (int k = 0; k < discs; ++k) {
    const double cx = ux(rng);
    const double cy = uy(rng);
    const double rad = ur(rng);
    for (int r = 0; r < h; ++r) {
      for (int c = 0; c < w; ++c) {
        if (std::hypot(r - cy, c - cx) <= rad) m.set(r, c, true);
      }
    }
  }
  if (m.count() == 0) m.set(h / 2, w / 2, true);
  return m;
}

/// Random mask with at least one foreground pixel, mixing noise and blobs.
inline BinaryMask random_nonempty(int h, int w, std::mt19937_64& rng) {
  std::uniform_int_distribution<int> pick(0, 2);
  BinaryMask m = pick(rng) == 0 ? random_mask(h, w, std::uniform_real_distribution<double>(0.05, 0.6)(rng), rng)
                                : random_blob(h, w, rng);
  if (m.count() == 0) m.set(0, 0, true);
  return m;
}

/// Pixels that are foreground and touch background or the border (4-neighbours).
inline std::vector<Pixel> naive_boundary(const BinaryMask& m) {
  std::vector<Pixel> out;
  for (int r = 0; r < m.height(); ++r) {
    for (int c = 0; c < m.width(); ++c) {
      if (!m.at(r, c)) continue;
      const int dr[] = {-1, 1, 0, 0};
      const int dc[] = {0, 0, -1, 1};
      bool edge = false;
      for (int k = 0; k < 4; ++k) {
        const int rr = r + dr[k];
        const int cc = c + dc[k];
        if (rr < 0 || cc < 0 || rr >= m.height() || cc >= m.width() || !m.at(rr, cc)) edge = true;
      }
      if (edge) out.push_back({r, c});
    }
  }
  return out;
}

inline double nearest(Pixel p, const std::vector<Pixel>& set) {
  double best = std::numeric_limits<double>::infinity();
  for (const Pixel& q : set) best = std::min(best, std::hypot(p.row - q.row, p.col - q.col));
  return best;
}

/// Distance from every pixel to the nearest foreground pixel, by full scan.
inline std::vector<double> naive_edt(const BinaryMask& feature) {
  std::vector<Pixel> pts;
  for (int r = 0; r < feature.height(); ++r) {
    for (int c = 0; c < feature.width(); ++c) {
      if (feature.at(r, c)) pts.push_back({r, c});
    }
  }
  std::vector<double> out;
  for (int r = 0; r < feature.height(); ++r) {
    for (int c = 0; c < feature.width(); ++c) out.push_back(nearest({r, c}, pts));
  }
  return out;
}

/// Pairwise nearest-boundary distances in both directions.
inline std::pair<std::vector<double>, std::vector<double>> naive_surface(const BinaryMask& pred, const BinaryMask& gt) {
  const std::vector<Pixel> bp = naive_boundary(pred);
  const std::vector<Pixel> bg = naive_boundary(gt);
  std::vector<double> pg;
  std::vector<double> gp;
  for (const Pixel& p : bp) pg.push_back(nearest(p, bg));
  for (const Pixel& p : bg) gp.push_back(nearest(p, bp));
  return {pg, gp};
}

/// Composed boundary Gaussians by the textbook product over all points.
inline std::vector<double> naive_heat(const BinaryMask& m, double sigma) {
  const std::vector<Pixel> pts = naive_boundary(m);
  const double pi = std::acos(-1.0);
  std::vector<double> out;
  for (int r = 0; r < m.height(); ++r) {
    for (int c = 0; c < m.width(); ++c) {
      double keep = 1.0;
      for (const Pixel& p : pts) {
        const double d2 = (r - p.row) * (r - p.row) + (c - p.col) * (c - p.col);
        keep *= 1.0 - std::exp(-d2 / (2 * sigma * sigma)) / (2 * pi * sigma * sigma);
      }
      out.push_back(1.0 - keep);
    }
  }
  return out;
}

inline double max_abs_diff(std::span<const double> a, std::span<const double> b) {
  double d = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) d = std::max(d, std::abs(a[i] - b[i]));
  return d;
}

inline ScalarField random_unit_field(int h, int w, std::mt19937_64& rng, double hi = 1.0) {
  std::uniform_real_distribution<double> u(0.0, hi);
  ScalarField f(h, w);
  for (double& v : f.values()) v = u(rng);
  return f;
}

}  // namespace bsda::test
