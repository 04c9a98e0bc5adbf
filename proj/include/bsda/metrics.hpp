#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "bsda/mask.hpp"

namespace bsda {

/// Percent overlaps and pixel surface distances for one prediction.
struct SegScore {
  double dice = 0.0;
  double jaccard = 0.0;
  double asd = 0.0;
  double hd95 = 0.0;
};

struct Overlap {
  double dice = 0.0;
  double jaccard = 0.0;
};

struct SurfaceDistances {
  std::vector<double> pred_to_gt;
  std::vector<double> gt_to_pred;
};

/// Both scores are 100 when the two masks are empty.
Overlap dice_jaccard(const BinaryMask& pred, const BinaryMask& gt);

/// Distances from each inner-boundary pixel of one mask to the nearest
/// inner-boundary pixel of the other. Throws EmptyForeground if either mask is
/// empty.
SurfaceDistances surface_distances(const BinaryMask& pred, const BinaryMask& gt);

double asd(std::span<const double> pred_to_gt, std::span<const double> gt_to_pred);

/// Nearest-rank 95th percentile: element ceil(0.95 n) of the sorted list.
double percentile95(std::span<const double> values);

double hd95(std::span<const double> pred_to_gt, std::span<const double> gt_to_pred);

/// Per-sample scoring. Distance metrics are absent when either mask is empty;
/// `both_empty` flags the empty/empty convention.
struct SampleScore {
  std::string id;
  Overlap overlap;
  std::optional<double> asd;
  std::optional<double> hd95;
  bool both_empty = false;
};

SampleScore score_sample(std::string id, const BinaryMask& pred, const BinaryMask& gt);

struct SegSummary {
  SegScore mean;
  SegScore stddev;
  std::size_t samples = 0;
  /// Samples whose distance metrics could not be computed.
  std::size_t distance_errors = 0;
};

/// Population standard deviation; distance means skip samples without distances.
SegSummary summarize(std::span<const SampleScore> scores);

/// `sample,dice,jaccard,asd,hd95` rows followed by a `mean±std` row. Missing
/// distances are written as NA.
void write_segmentation_csv(std::ostream& os, std::span<const SampleScore> scores);

class ConfusionMatrix {
 public:
  explicit ConfusionMatrix(int classes);
  ConfusionMatrix(int classes, std::vector<std::int64_t> counts);

  int classes() const noexcept { return classes_; }
  std::int64_t at(int truth, int predicted) const { return counts_[index(truth, predicted)]; }
  void add(int truth, int predicted);
  std::int64_t total() const noexcept;

 private:
  std::size_t index(int truth, int predicted) const;

  int classes_;
  std::vector<std::int64_t> counts_;
};

struct PrecisionRecall {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
};

struct ClassReport {
  std::vector<PrecisionRecall> per_class;
  std::vector<std::int64_t> support;
  PrecisionRecall macro_avg;
  PrecisionRecall weighted_avg;
  double accuracy = 0.0;
  double kappa = 0.0;
};

/// Throws EmptyMatrix for a zero total and DegenerateKappa when chance
/// agreement is 1.
ClassReport classification_report(const ConfusionMatrix& cm);

/// `class,precision,recall,f1,support` rows, then macro avg, weighted avg,
/// accuracy and kappa rows.
void write_classification_csv(std::ostream& os, const ClassReport& report,
                              std::span<const std::string> class_names);

}  // namespace bsda
