#include "bsda/augment.hpp"

#include <algorithm>
#include <numeric>

namespace bsda {

namespace {

// Source cell read by output cell (r, c). Rotation is applied first, then
// flips in output coordinates.
template <class Grid, class Make>
Grid remap(const Grid& in, const GeometricTransform& t, Make make) {
  const int turns = ((t.quarter_turns % 4) + 4) % 4;
  const int h = in.height();
  const int w = in.width();
  const int oh = turns % 2 ? w : h;
  const int ow = turns % 2 ? h : w;
  Grid out = make(oh, ow);
  for (int r = 0; r < oh; ++r) {
    for (int c = 0; c < ow; ++c) {
      const int rr = t.flip_vertical ? oh - 1 - r : r;
      const int cc = t.flip_horizontal ? ow - 1 - c : c;
      int sr = rr;
      int sc = cc;
      switch (turns) {
        case 1: sr = cc; sc = w - 1 - rr; break;
        case 2: sr = h - 1 - rr; sc = w - 1 - cc; break;
        case 3: sr = h - 1 - cc; sc = rr; break;
        default: break;
      }
      if constexpr (std::is_same_v<Grid, BinaryMask>) {
        out.set(r, c, in.at(sr, sc));
      } else {
        out.at(r, c) = in.at(sr, sc);
      }
    }
  }
  return out;
}

}  // namespace

AugmentPlan draw_augment(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  AugmentPlan p;
  p.geometry.quarter_turns = std::uniform_int_distribution<int>(0, 3)(rng);
  p.geometry.flip_horizontal = unit(rng) < 0.5;
  p.geometry.flip_vertical = unit(rng) < 0.5;
  p.contrast = 0.8 + 0.4 * unit(rng);
  p.noise_sigma = 0.05 * unit(rng);
  p.blur = unit(rng) < 0.2;
  return p;
}

ScalarField apply_geometry(const ScalarField& field, const GeometricTransform& t) {
  return remap(field, t, [&](int h, int w) { return ScalarField(h, w, field.kind()); });
}

BinaryMask apply_geometry(const BinaryMask& mask, const GeometricTransform& t) {
  return remap(mask, t, [](int h, int w) { return BinaryMask(h, w); });
}

ScalarField apply_intensity(const ScalarField& image, const AugmentPlan& plan, std::mt19937_64& rng) {
  ScalarField out = image;
  auto v = out.values();
  const double mean = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
  std::normal_distribution<double> noise(0.0, 1.0);
  for (double& x : v) x += (plan.contrast - 1.0) * (x - mean) + plan.noise_sigma * noise(rng);
  if (plan.blur) {
    const ScalarField src = out;
    for (int r = 0; r < out.height(); ++r) {
      for (int c = 0; c < out.width(); ++c) {
        double sum = 0.0;
        int n = 0;
        for (int dr = -1; dr <= 1; ++dr) {
          for (int dc = -1; dc <= 1; ++dc) {
            const int rr = r + dr;
            const int cc = c + dc;
            if (rr < 0 || cc < 0 || rr >= out.height() || cc >= out.width()) continue;
            sum += src.at(rr, cc);
            ++n;
          }
        }
        out.at(r, c) = sum / n;
      }
    }
  }
  for (double& x : out.values()) x = std::clamp(x, 0.0, 1.0);
  return out;
}

AugmentedPair augment(const ScalarField& image, const BinaryMask& mask, std::mt19937_64& rng) {
  const AugmentPlan plan = draw_augment(rng);
  return {apply_intensity(apply_geometry(image, plan.geometry), plan, rng), apply_geometry(mask, plan.geometry)};
}

}  // namespace bsda
