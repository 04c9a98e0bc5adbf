#include "bsda/mask.hpp"

#include <algorithm>
#include <string>

#include "bsda/error.hpp"

namespace bsda {

std::string_view errc_name(Errc code) noexcept {
  switch (code) {
    case Errc::InvalidMask: return "InvalidMask";
    case Errc::EmptyFeatureSet: return "EmptyFeatureSet";
    case Errc::EmptyForeground: return "EmptyForeground";
    case Errc::InvalidSigma: return "InvalidSigma";
    case Errc::DimMismatch: return "DimMismatch";
    case Errc::ValueOutOfRange: return "ValueOutOfRange";
    case Errc::EmptyList: return "EmptyList";
    case Errc::EmptyMatrix: return "EmptyMatrix";
    case Errc::DegenerateKappa: return "DegenerateKappa";
    case Errc::ShapeMismatch: return "ShapeMismatch";
    case Errc::BatchTooSmall: return "BatchTooSmall";
    case Errc::LabelOutOfRange: return "LabelOutOfRange";
    case Errc::NonFinite: return "NonFinite";
    case Errc::ConfigInvalid: return "ConfigInvalid";
    case Errc::DataEmpty: return "DataEmpty";
    case Errc::ResolutionMismatch: return "ResolutionMismatch";
    case Errc::DegenerateShape: return "DegenerateShape";
    case Errc::IoError: return "IoError";
    case Errc::FormatError: return "FormatError";
  }
  return "Unknown";
}

namespace {

void check_dims(int height, int width) {
  if (height < 1 || width < 1) {
    throw Error(Errc::InvalidMask,
                "mask dims must be positive, got " + std::to_string(height) + "x" +
                    std::to_string(width));
  }
}

bool is_boundary(const BinaryMask& mask, int r, int c) {
  if (!mask.at(r, c)) return false;
  return !mask.foreground_or_false(r - 1, c) || !mask.foreground_or_false(r + 1, c) ||
         !mask.foreground_or_false(r, c - 1) || !mask.foreground_or_false(r, c + 1);
}

}  // namespace

BinaryMask::BinaryMask(int height, int width) : height_(height), width_(width) {
  check_dims(height, width);
  cells_.assign(static_cast<std::size_t>(height) * static_cast<std::size_t>(width), 0);
}

BinaryMask::BinaryMask(int height, int width, std::vector<std::uint8_t> cells)
    : height_(height), width_(width), cells_(std::move(cells)) {
  check_dims(height, width);
  if (cells_.size() != static_cast<std::size_t>(height) * static_cast<std::size_t>(width)) {
    throw Error(Errc::InvalidMask, "cell count does not match dims");
  }
  for (auto& v : cells_) v = v != 0 ? 1 : 0;
}

std::size_t BinaryMask::count() const noexcept {
  return static_cast<std::size_t>(std::count(cells_.begin(), cells_.end(), std::uint8_t{1}));
}

BinaryMask BinaryMask::complement() const {
  BinaryMask out(height_, width_);
  for (std::size_t i = 0; i < cells_.size(); ++i) out.cells_[i] = cells_[i] ? 0 : 1;
  return out;
}

BoundarySet::BoundarySet(int height, int width, std::vector<Pixel> points)
    : height_(height), width_(width), points_(std::move(points)) {
  check_dims(height, width);
  std::sort(points_.begin(), points_.end());
  if (std::adjacent_find(points_.begin(), points_.end()) != points_.end()) {
    throw Error(Errc::InvalidMask, "duplicate boundary point");
  }
  for (const auto& p : points_) {
    if (p.row < 0 || p.col < 0 || p.row >= height_ || p.col >= width_) {
      throw Error(Errc::InvalidMask, "boundary point outside parent dims");
    }
  }
}

BinaryMask BoundarySet::to_mask() const {
  BinaryMask out(height_, width_);
  for (const auto& p : points_) out.set(p.row, p.col, true);
  return out;
}

BoundarySet extract_boundary(const BinaryMask& mask) {
  std::vector<Pixel> points;
  for (int r = 0; r < mask.height(); ++r) {
    for (int c = 0; c < mask.width(); ++c) {
      if (is_boundary(mask, r, c)) points.push_back({r, c});
    }
  }
  return BoundarySet(mask.height(), mask.width(), std::move(points));
}

MaskPartition partition(const BinaryMask& mask) {
  std::vector<Pixel> interior;
  std::vector<Pixel> boundary;
  std::vector<Pixel> exterior;
  for (int r = 0; r < mask.height(); ++r) {
    for (int c = 0; c < mask.width(); ++c) {
      if (!mask.at(r, c)) {
        exterior.push_back({r, c});
      } else if (is_boundary(mask, r, c)) {
        boundary.push_back({r, c});
      } else {
        interior.push_back({r, c});
      }
    }
  }
  return {std::move(interior), BoundarySet(mask.height(), mask.width(), std::move(boundary)),
          std::move(exterior)};
}

}  // namespace bsda
