#include "bsda/synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numbers>
#include <sstream>

#include "bsda/config.hpp"
#include "bsda/error.hpp"
#include "bsda/io.hpp"

namespace bsda {

namespace {

constexpr int kHarmonics = 5;
constexpr int kMaxTries = 10;
constexpr int kMinForeground = 8;
constexpr double kJitter = 0.10;
constexpr double kInsideLevel = 0.2;
constexpr double kInsideNoise = 0.03;
constexpr double kBackgroundLevel = 0.6;

constexpr std::array<std::string_view, kFazClasses> kClassNames{"normal", "enlarged_irregular", "reduced"};

double uniform(std::mt19937_64& rng, double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

// Bilinear value noise in [0, 1] on a lattice with the given spacing.
std::vector<double> value_noise(int size, int spacing, std::mt19937_64& rng) {
  const int cells = size / spacing + 2;
  std::vector<double> lattice(static_cast<std::size_t>(cells * cells));
  for (double& v : lattice) v = uniform(rng, 0.0, 1.0);
  const auto smooth = [](double t) { return t * t * (3.0 - 2.0 * t); };
  std::vector<double> out(static_cast<std::size_t>(size * size));
  for (int r = 0; r < size; ++r) {
    const int gy = r / spacing;
    const double ty = smooth(static_cast<double>(r % spacing) / spacing);
    for (int c = 0; c < size; ++c) {
      const int gx = c / spacing;
      const double tx = smooth(static_cast<double>(c % spacing) / spacing);
      const auto at = [&](int y, int x) { return lattice[static_cast<std::size_t>(y * cells + x)]; };
      const double top = at(gy, gx) + (at(gy, gx + 1) - at(gy, gx)) * tx;
      const double bottom = at(gy + 1, gx) + (at(gy + 1, gx + 1) - at(gy + 1, gx)) * tx;
      out[static_cast<std::size_t>(r * size + c)] = top + (bottom - top) * ty;
    }
  }
  return out;
}

ScalarField box_blur(const ScalarField& in) {
  ScalarField out(in.height(), in.width(), in.kind());
  for (int r = 0; r < in.height(); ++r) {
    for (int c = 0; c < in.width(); ++c) {
      double sum = 0.0;
      int n = 0;
      for (int dr = -1; dr <= 1; ++dr) {
        for (int dc = -1; dc <= 1; ++dc) {
          const int rr = r + dr;
          const int cc = c + dc;
          if (rr < 0 || cc < 0 || rr >= in.height() || cc >= in.width()) continue;
          sum += in.at(rr, cc);
          ++n;
        }
      }
      out.at(r, c) = sum / n;
    }
  }
  return out;
}

BinaryMask rasterize(int size, double cx, double cy, double r0, double amplitude,
                     const std::array<double, kHarmonics>& weights, const std::array<double, kHarmonics>& phases) {
  BinaryMask mask(size, size);
  for (int r = 0; r < size; ++r) {
    for (int c = 0; c < size; ++c) {
      const double dx = c - cx;
      const double dy = r - cy;
      const double theta = std::atan2(dy, dx);
      double wobble = 0.0;
      for (int k = 0; k < kHarmonics; ++k) wobble += weights[k] * std::cos((k + 1) * theta + phases[k]);
      const double radius = r0 * (1.0 + amplitude * wobble);
      mask.set(r, c, std::hypot(dx, dy) <= radius);
    }
  }
  return mask;
}

bool usable(const BinaryMask& mask) {
  if (mask.count() < static_cast<std::size_t>(kMinForeground) || mask.count() == mask.size()) return false;
  return !partition(mask).interior.empty();
}

}  // namespace

std::string_view class_name(FazClass c) noexcept { return kClassNames[static_cast<std::size_t>(c)]; }

FazClass parse_class(std::string_view name) {
  for (int i = 0; i < kFazClasses; ++i) {
    if (kClassNames[static_cast<std::size_t>(i)] == name) return static_cast<FazClass>(i);
  }
  throw Error(Errc::FormatError, "unknown class '" + std::string(name) + "'");
}

void SynthConfig::validate() const {
  const auto fail = [](const std::string& what) { throw Error(Errc::ConfigInvalid, what); };
  if (image_size < 8) fail("image_size must be >= 8");
  if (n_per_class < 1) fail("n_per_class must be >= 1");
  if (!(texture_amplitude >= 0.0 && texture_amplitude <= 0.4)) fail("texture_amplitude must lie in [0, 0.4]");
  for (const ShapeRange& s : shapes) {
    if (!(s.radius_min > 0.0 && s.radius_min <= s.radius_max && s.radius_max < 0.45)) {
      fail("radius ranges must satisfy 0 < min <= max < 0.45");
    }
    if (!(s.amplitude >= 0.0 && s.amplitude < 1.0)) fail("amplitude must lie in [0, 1)");
  }
  // Disjoint and ordered: reduced < normal < enlarged.
  const ShapeRange& normal = shapes[static_cast<int>(FazClass::Normal)];
  const ShapeRange& enlarged = shapes[static_cast<int>(FazClass::EnlargedIrregular)];
  const ShapeRange& reduced = shapes[static_cast<int>(FazClass::Reduced)];
  if (!(reduced.radius_max < normal.radius_min && normal.radius_max < enlarged.radius_min)) {
    fail("radius ranges must be ordered reduced < normal < enlarged and disjoint");
  }
}

SynthSample gen_sample(FazClass label, std::mt19937_64& rng, const SynthConfig& config) {
  config.validate();
  const int size = config.image_size;
  const ShapeRange& shape = config.shapes[static_cast<std::size_t>(label)];
  for (int attempt = 0; attempt < kMaxTries; ++attempt) {
    const double r0 = uniform(rng, shape.radius_min, shape.radius_max) * size;
    std::array<double, kHarmonics> weights{};
    std::array<double, kHarmonics> phases{};
    double total = 0.0;
    for (int k = 0; k < kHarmonics; ++k) {
      weights[k] = uniform(rng, 0.0, 1.0);
      phases[k] = uniform(rng, 0.0, 2.0 * std::numbers::pi);
      total += weights[k];
    }
    // Normalised so the radius stays within r0 (1 +- a).
    for (double& w : weights) w /= total;
    const double centre = (size - 1) / 2.0;
    const double cx = centre + uniform(rng, -kJitter, kJitter) * size;
    const double cy = centre + uniform(rng, -kJitter, kJitter) * size;
    BinaryMask mask = rasterize(size, cx, cy, r0, shape.amplitude, weights, phases);
    if (!usable(mask)) continue;

    const std::vector<double> coarse = value_noise(size, 8, rng);
    const std::vector<double> fine = value_noise(size, 3, rng);
    ScalarField image(size, size);
    for (int r = 0; r < size; ++r) {
      for (int c = 0; c < size; ++c) {
        const std::size_t i = static_cast<std::size_t>(r * size + c);
        const double texture = 0.65 * coarse[i] + 0.35 * fine[i];
        const double jitter = uniform(rng, -1.0, 1.0);
        image.at(r, c) = mask.at(r, c) ? kInsideLevel + kInsideNoise * jitter
                                       : kBackgroundLevel + config.texture_amplitude * (2.0 * texture - 1.0);
      }
    }
    image = box_blur(image);
    for (double& v : image.values()) v = std::clamp(v, 0.0, 1.0);
    return SynthSample{std::move(image), std::move(mask), label};
  }
  throw Error(Errc::DegenerateShape, "no usable " + std::string(class_name(label)) + " shape after " +
                                         std::to_string(kMaxTries) + " attempts");
}

std::mt19937_64 sample_rng(std::uint64_t seed, int id) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(id), 0x5a17u};
  return std::mt19937_64(seq);
}

std::vector<ManifestRow> plan_dataset(const SynthConfig& config) {
  config.validate();
  const int n = config.n_per_class;
  const int n_train = static_cast<int>(std::lround(0.7 * n));
  const int n_val = static_cast<int>(std::lround(0.1 * n));
  const int width = std::max(4, static_cast<int>(std::to_string(n * kFazClasses - 1).size()));
  std::vector<ManifestRow> rows;
  for (int c = 0; c < kFazClasses; ++c) {
    std::vector<int> order(static_cast<std::size_t>(n));
    for (int j = 0; j < n; ++j) order[static_cast<std::size_t>(j)] = j;
    std::seed_seq seq{static_cast<std::uint32_t>(config.seed), static_cast<std::uint32_t>(config.seed >> 32),
                      static_cast<std::uint32_t>(c), 0x5b117u};
    std::mt19937_64 rng(seq);
    std::shuffle(order.begin(), order.end(), rng);
    std::vector<Split> split(static_cast<std::size_t>(n), Split::Test);
    for (int j = 0; j < n; ++j) {
      const int slot = order[static_cast<std::size_t>(j)];
      split[static_cast<std::size_t>(slot)] = j < n_train ? Split::Train : j < n_train + n_val ? Split::Val : Split::Test;
    }
    for (int j = 0; j < n; ++j) {
      std::string digits = std::to_string(c * n + j);
      if (static_cast<int>(digits.size()) < width) digits.insert(0, static_cast<std::size_t>(width) - digits.size(), '0');
      rows.push_back({"s" + digits, static_cast<FazClass>(c), split[static_cast<std::size_t>(j)]});
    }
  }
  return rows;
}

SynthSample gen_row(const ManifestRow& row, int index, const SynthConfig& config) {
  std::mt19937_64 rng = sample_rng(config.seed, index);
  return gen_sample(row.label, rng, config);
}

void gen_dataset(const SynthConfig& config, const std::filesystem::path& out) {
  const std::vector<ManifestRow> rows = plan_dataset(config);
  std::error_code ec;
  for (const auto& dir : {out, out / "images", out / "masks"}) {
    std::filesystem::create_directories(dir, ec);
    if (ec || !std::filesystem::is_directory(dir)) {
      throw Error(Errc::IoError, "cannot create directory " + dir.string() + (ec ? ": " + ec.message() : ""));
    }
  }
  std::ostringstream manifest;
  manifest << "id,class,split\n";
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const ManifestRow& row = rows[i];
    const SynthSample s = gen_row(row, static_cast<int>(i), config);
    io::write_image(out / "images" / (row.id + ".pgm"), s.image);
    io::write_mask(out / "masks" / (row.id + ".pgm"), s.mask);
    manifest << row.id << ',' << class_name(row.label) << ',' << split_name(row.split) << '\n';
  }
  io::write_file(out / "manifest.csv", manifest.str());
  io::write_file(out / "config.json", dump_json(to_json(config)));
}

ShapeFeatures shape_features(const BinaryMask& mask) {
  ShapeFeatures f;
  f.area = static_cast<double>(mask.count());
  // Marching squares over the zero-padded grid; each cell holds 2 or 4 edge
  // crossings at edge midpoints.
  for (int r = -1; r < mask.height(); ++r) {
    for (int c = -1; c < mask.width(); ++c) {
      const bool tl = mask.foreground_or_false(r, c);
      const bool tr = mask.foreground_or_false(r, c + 1);
      const bool br = mask.foreground_or_false(r + 1, c + 1);
      const bool bl = mask.foreground_or_false(r + 1, c);
      const bool top = tl != tr;
      const bool right = tr != br;
      const bool bottom = bl != br;
      const bool left = tl != bl;
      const int crossings = top + right + bottom + left;
      if (crossings == 4) {
        f.perimeter += 2.0 * std::sqrt(0.5);
      } else if (crossings == 2) {
        f.perimeter += (top && bottom) || (left && right) ? 1.0 : std::sqrt(0.5);
      }
    }
  }
  f.compactness = f.perimeter > 0.0 ? 4.0 * std::numbers::pi * f.area / (f.perimeter * f.perimeter) : 0.0;
  return f;
}

}  // namespace bsda
