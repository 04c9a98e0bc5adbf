#pragma once

#include <compare>
#include <cstdint>
#include <span>
#include <vector>

namespace bsda {

struct Pixel {
  int row = 0;
  int col = 0;

  auto operator<=>(const Pixel&) const = default;
};

/// Row-major binary grid. A cell value of 1 marks foreground.
class BinaryMask {
 public:
  BinaryMask(int height, int width);
  BinaryMask(int height, int width, std::vector<std::uint8_t> cells);

  int height() const noexcept { return height_; }
  int width() const noexcept { return width_; }
  std::size_t size() const noexcept { return cells_.size(); }

  bool at(int row, int col) const { return cells_[index(row, col)] != 0; }
  void set(int row, int col, bool value) { cells_[index(row, col)] = value ? 1 : 0; }
  bool contains(int row, int col) const noexcept {
    return row >= 0 && col >= 0 && row < height_ && col < width_;
  }
  /// Out-of-bounds reads as background.
  bool foreground_or_false(int row, int col) const noexcept {
    return contains(row, col) && cells_[index(row, col)] != 0;
  }

  std::span<const std::uint8_t> cells() const noexcept { return cells_; }
  std::size_t count() const noexcept;
  BinaryMask complement() const;

  bool operator==(const BinaryMask&) const = default;

 private:
  std::size_t index(int row, int col) const noexcept {
    return static_cast<std::size_t>(row) * static_cast<std::size_t>(width_) +
           static_cast<std::size_t>(col);
  }

  int height_;
  int width_;
  std::vector<std::uint8_t> cells_;
};

/// Inner 4-connected boundary of a mask, sorted row-major.
class BoundarySet {
 public:
  BoundarySet(int height, int width, std::vector<Pixel> points);

  int height() const noexcept { return height_; }
  int width() const noexcept { return width_; }
  std::span<const Pixel> points() const noexcept { return points_; }
  std::size_t size() const noexcept { return points_.size(); }
  bool empty() const noexcept { return points_.empty(); }

  BinaryMask to_mask() const;

 private:
  int height_;
  int width_;
  std::vector<Pixel> points_;
};

struct MaskPartition {
  std::vector<Pixel> interior;
  BoundarySet boundary;
  std::vector<Pixel> exterior;
};

/// Foreground pixels with at least one background 4-neighbour; the image
/// border counts as background.
BoundarySet extract_boundary(const BinaryMask& mask);

MaskPartition partition(const BinaryMask& mask);

}  // namespace bsda
