#include "bsda/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <ostream>

#include "bsda/distance.hpp"
#include "bsda/error.hpp"

namespace bsda {

namespace {

void check_same_dims(const BinaryMask& a, const BinaryMask& b) {
  if (a.height() != b.height() || a.width() != b.width()) {
    throw Error(Errc::DimMismatch, "masks differ in dims");
  }
}

std::vector<double> distances_to(const BoundarySet& from, const BoundarySet& to) {
  const ScalarField dist = edt(to.to_mask());
  std::vector<double> out;
  out.reserve(from.size());
  for (const auto& p : from.points()) out.push_back(dist.at(p.row, p.col));
  return out;
}

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.4f", v);
  return buf;
}

struct Moments {
  double sum = 0.0;
  double sum_sq = 0.0;
  std::size_t n = 0;

  void add(double v) {
    sum += v;
    sum_sq += v * v;
    ++n;
  }
  double mean() const { return n ? sum / static_cast<double>(n) : 0.0; }
  double stddev() const {
    if (n == 0) return 0.0;
    const double m = mean();
    return std::sqrt(std::max(0.0, sum_sq / static_cast<double>(n) - m * m));
  }
};

PrecisionRecall with_f1(double precision, double recall) {
  const double denom = precision + recall;
  return {precision, recall, denom > 0.0 ? 2.0 * precision * recall / denom : 0.0};
}

}  // namespace

Overlap dice_jaccard(const BinaryMask& pred, const BinaryMask& gt) {
  check_same_dims(pred, gt);
  std::size_t inter = 0;
  std::size_t uni = 0;
  std::size_t p_count = 0;
  std::size_t g_count = 0;
  const auto p = pred.cells();
  const auto g = gt.cells();
  for (std::size_t i = 0; i < p.size(); ++i) {
    inter += p[i] & g[i];
    uni += p[i] | g[i];
    p_count += p[i];
    g_count += g[i];
  }
  if (p_count + g_count == 0) return {100.0, 100.0};
  return {200.0 * static_cast<double>(inter) / static_cast<double>(p_count + g_count),
          100.0 * static_cast<double>(inter) / static_cast<double>(uni)};
}

SurfaceDistances surface_distances(const BinaryMask& pred, const BinaryMask& gt) {
  check_same_dims(pred, gt);
  if (pred.count() == 0) throw Error(Errc::EmptyForeground, "prediction has no foreground");
  if (gt.count() == 0) throw Error(Errc::EmptyForeground, "ground truth has no foreground");
  const BoundarySet pred_surface = extract_boundary(pred);
  const BoundarySet gt_surface = extract_boundary(gt);
  return {distances_to(pred_surface, gt_surface), distances_to(gt_surface, pred_surface)};
}

double asd(std::span<const double> pred_to_gt, std::span<const double> gt_to_pred) {
  if (pred_to_gt.empty() || gt_to_pred.empty()) throw Error(Errc::EmptyList, "asd of an empty surface");
  const double total = std::accumulate(pred_to_gt.begin(), pred_to_gt.end(), 0.0) +
                       std::accumulate(gt_to_pred.begin(), gt_to_pred.end(), 0.0);
  return total / static_cast<double>(pred_to_gt.size() + gt_to_pred.size());
}

double percentile95(std::span<const double> values) {
  if (values.empty()) throw Error(Errc::EmptyList, "percentile of an empty list");
  std::vector<double> sorted(values.begin(), values.end());
  std::sort(sorted.begin(), sorted.end());
  // ceil(0.95 n) in integer arithmetic, 1-based.
  const std::size_t rank = (95 * sorted.size() + 99) / 100;
  return sorted[std::max<std::size_t>(rank, 1) - 1];
}

double hd95(std::span<const double> pred_to_gt, std::span<const double> gt_to_pred) {
  if (pred_to_gt.empty() || gt_to_pred.empty()) throw Error(Errc::EmptyList, "hd95 of an empty surface");
  return std::max(percentile95(pred_to_gt), percentile95(gt_to_pred));
}

SampleScore score_sample(std::string id, const BinaryMask& pred, const BinaryMask& gt) {
  SampleScore score;
  score.id = std::move(id);
  score.overlap = dice_jaccard(pred, gt);
  const bool pred_empty = pred.count() == 0;
  const bool gt_empty = gt.count() == 0;
  score.both_empty = pred_empty && gt_empty;
  if (!pred_empty && !gt_empty) {
    const SurfaceDistances d = surface_distances(pred, gt);
    score.asd = asd(d.pred_to_gt, d.gt_to_pred);
    score.hd95 = hd95(d.pred_to_gt, d.gt_to_pred);
  }
  return score;
}

SegSummary summarize(std::span<const SampleScore> scores) {
  Moments dice;
  Moments jaccard;
  Moments asd_m;
  Moments hd_m;
  SegSummary out;
  for (const auto& s : scores) {
    dice.add(s.overlap.dice);
    jaccard.add(s.overlap.jaccard);
    if (s.asd && s.hd95) {
      asd_m.add(*s.asd);
      hd_m.add(*s.hd95);
    } else {
      ++out.distance_errors;
    }
  }
  out.samples = scores.size();
  out.mean = {dice.mean(), jaccard.mean(), asd_m.mean(), hd_m.mean()};
  out.stddev = {dice.stddev(), jaccard.stddev(), asd_m.stddev(), hd_m.stddev()};
  return out;
}

void write_segmentation_csv(std::ostream& os, std::span<const SampleScore> scores) {
  os << "sample,dice,jaccard,asd,hd95\n";
  for (const auto& s : scores) {
    os << s.id << ',' << fmt(s.overlap.dice) << ',' << fmt(s.overlap.jaccard) << ','
       << (s.asd ? fmt(*s.asd) : "NA") << ',' << (s.hd95 ? fmt(*s.hd95) : "NA") << '\n';
  }
  const SegSummary sum = summarize(scores);
  const auto pm = [](double m, double s) { return fmt(m) + "\xC2\xB1" + fmt(s); };
  os << "mean\xC2\xB1std," << pm(sum.mean.dice, sum.stddev.dice) << ','
     << pm(sum.mean.jaccard, sum.stddev.jaccard) << ',' << pm(sum.mean.asd, sum.stddev.asd) << ','
     << pm(sum.mean.hd95, sum.stddev.hd95) << '\n';
}

ConfusionMatrix::ConfusionMatrix(int classes) : classes_(classes) {
  if (classes < 1) throw Error(Errc::EmptyMatrix, "confusion matrix needs at least one class");
  counts_.assign(static_cast<std::size_t>(classes) * static_cast<std::size_t>(classes), 0);
}

ConfusionMatrix::ConfusionMatrix(int classes, std::vector<std::int64_t> counts)
    : classes_(classes), counts_(std::move(counts)) {
  if (classes < 1) throw Error(Errc::EmptyMatrix, "confusion matrix needs at least one class");
  if (counts_.size() != static_cast<std::size_t>(classes) * static_cast<std::size_t>(classes)) {
    throw Error(Errc::DimMismatch, "confusion matrix counts must be k*k");
  }
  for (auto c : counts_) {
    if (c < 0) throw Error(Errc::ValueOutOfRange, "negative confusion count");
  }
}

std::size_t ConfusionMatrix::index(int truth, int predicted) const {
  if (truth < 0 || predicted < 0 || truth >= classes_ || predicted >= classes_) {
    throw Error(Errc::LabelOutOfRange, "class index outside confusion matrix");
  }
  return static_cast<std::size_t>(truth) * static_cast<std::size_t>(classes_) +
         static_cast<std::size_t>(predicted);
}

void ConfusionMatrix::add(int truth, int predicted) { ++counts_[index(truth, predicted)]; }

std::int64_t ConfusionMatrix::total() const noexcept {
  return std::accumulate(counts_.begin(), counts_.end(), std::int64_t{0});
}

ClassReport classification_report(const ConfusionMatrix& cm) {
  const std::int64_t total = cm.total();
  if (total <= 0) throw Error(Errc::EmptyMatrix, "confusion matrix is empty");
  const int k = cm.classes();
  const double n = static_cast<double>(total);

  std::vector<std::int64_t> row_sum(k, 0);
  std::vector<std::int64_t> col_sum(k, 0);
  std::int64_t trace = 0;
  for (int t = 0; t < k; ++t) {
    for (int p = 0; p < k; ++p) {
      row_sum[t] += cm.at(t, p);
      col_sum[p] += cm.at(t, p);
    }
    trace += cm.at(t, t);
  }

  ClassReport report;
  report.support = row_sum;
  double macro_p = 0.0, macro_r = 0.0, macro_f = 0.0;
  double weighted_p = 0.0, weighted_r = 0.0, weighted_f = 0.0;
  for (int c = 0; c < k; ++c) {
    const double tp = static_cast<double>(cm.at(c, c));
    const double precision = col_sum[c] > 0 ? 100.0 * tp / static_cast<double>(col_sum[c]) : 0.0;
    const double recall = row_sum[c] > 0 ? 100.0 * tp / static_cast<double>(row_sum[c]) : 0.0;
    const PrecisionRecall pr = with_f1(precision, recall);
    report.per_class.push_back(pr);
    macro_p += pr.precision;
    macro_r += pr.recall;
    macro_f += pr.f1;
    const double w = static_cast<double>(row_sum[c]) / n;
    weighted_p += w * pr.precision;
    weighted_r += w * pr.recall;
    weighted_f += w * pr.f1;
  }
  report.macro_avg = {macro_p / k, macro_r / k, macro_f / k};
  report.weighted_avg = {weighted_p, weighted_r, weighted_f};

  const double p_o = static_cast<double>(trace) / n;
  double p_e = 0.0;
  for (int c = 0; c < k; ++c) {
    p_e += static_cast<double>(row_sum[c]) * static_cast<double>(col_sum[c]);
  }
  p_e /= n * n;
  if (p_e >= 1.0) throw Error(Errc::DegenerateKappa, "chance agreement is 1; kappa undefined");
  report.accuracy = 100.0 * p_o;
  report.kappa = 100.0 * (p_o - p_e) / (1.0 - p_e);
  return report;
}

void write_classification_csv(std::ostream& os, const ClassReport& report,
                              std::span<const std::string> class_names) {
  const std::int64_t total =
      std::accumulate(report.support.begin(), report.support.end(), std::int64_t{0});
  os << "class,precision,recall,f1,support\n";
  for (std::size_t c = 0; c < report.per_class.size(); ++c) {
    const auto& pr = report.per_class[c];
    const std::string name = c < class_names.size() ? class_names[c] : std::to_string(c);
    os << name << ',' << fmt(pr.precision) << ',' << fmt(pr.recall) << ',' << fmt(pr.f1) << ','
       << report.support[c] << '\n';
  }
  os << "macro avg," << fmt(report.macro_avg.precision) << ',' << fmt(report.macro_avg.recall)
     << ',' << fmt(report.macro_avg.f1) << ',' << total << '\n';
  os << "weighted avg," << fmt(report.weighted_avg.precision) << ','
     << fmt(report.weighted_avg.recall) << ',' << fmt(report.weighted_avg.f1) << ',' << total
     << '\n';
  os << "accuracy,,," << fmt(report.accuracy) << ',' << total << '\n';
  os << "kappa,,," << fmt(report.kappa) << ',' << total << '\n';
}

}  // namespace bsda
