#pragma once

#include <span>
#include <vector>

namespace bsda {

enum class FieldKind { RawSdm, NormalizedSdm, Heatmap, Probability, Other };

/// Row-major real-valued grid. The kind tag carries a range contract that
/// validate() enforces.
class ScalarField {
 public:
  ScalarField(int height, int width, FieldKind kind = FieldKind::Other, double fill = 0.0);
  ScalarField(int height, int width, std::vector<double> values, FieldKind kind = FieldKind::Other);

  int height() const noexcept { return height_; }
  int width() const noexcept { return width_; }
  std::size_t size() const noexcept { return values_.size(); }
  FieldKind kind() const noexcept { return kind_; }
  void set_kind(FieldKind kind) noexcept { kind_ = kind; }

  double at(int row, int col) const { return values_[index(row, col)]; }
  double& at(int row, int col) { return values_[index(row, col)]; }

  std::span<const double> values() const noexcept { return values_; }
  std::span<double> values() noexcept { return values_; }

  double min() const;
  double max() const;

  /// Throws ValueOutOfRange if a value is non-finite or violates the kind's range.
  void validate() const;

  bool operator==(const ScalarField&) const = default;

 private:
  std::size_t index(int row, int col) const noexcept {
    return static_cast<std::size_t>(row) * static_cast<std::size_t>(width_) +
           static_cast<std::size_t>(col);
  }

  int height_;
  int width_;
  std::vector<double> values_;
  FieldKind kind_;
};

}  // namespace bsda
