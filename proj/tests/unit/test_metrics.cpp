#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "bsda/error.hpp"
#include "bsda/metrics.hpp"
#include "support.hpp"

using namespace bsda;

namespace {

BinaryMask block(int h, int w, int r0, int c0, int size) {
  BinaryMask m(h, w);
  for (int r = r0; r < r0 + size; ++r) {
    for (int c = c0; c < c0 + size; ++c) m.set(r, c, true);
  }
  return m;
}

Errc code_of(auto&& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected throw");
  return Errc::IoError;
}

/// Kappa straight from the definition, for cross-checking.
double kappa_oracle(const std::vector<std::vector<double>>& m) {
  const std::size_t k = m.size();
  double n = 0.0;
  double agree = 0.0;
  std::vector<double> rows(k, 0.0);
  std::vector<double> cols(k, 0.0);
  for (std::size_t i = 0; i < k; ++i) {
    for (std::size_t j = 0; j < k; ++j) {
      n += m[i][j];
      rows[i] += m[i][j];
      cols[j] += m[i][j];
    }
    agree += m[i][i];
  }
  double chance = 0.0;
  for (std::size_t i = 0; i < k; ++i) chance += rows[i] * cols[i] / (n * n);
  return 100.0 * (agree / n - chance) / (1.0 - chance);
}

}  // namespace

TEST_CASE("dice and jaccard examples") {
  const BinaryMask a = block(6, 6, 1, 1, 3);
  CHECK(dice_jaccard(a, a).dice == 100.0);
  CHECK(dice_jaccard(a, a).jaccard == 100.0);
  const Overlap disjoint = dice_jaccard(a, block(6, 6, 4, 4, 2));
  CHECK(disjoint.dice == 0.0);
  CHECK(disjoint.jaccard == 0.0);
  const Overlap shifted = dice_jaccard(a, block(6, 6, 1, 2, 3));
  CHECK(shifted.dice == doctest::Approx(200.0 * 6 / 18).epsilon(1e-14));
  CHECK(shifted.dice == doctest::Approx(66.67).epsilon(1e-4));
  CHECK(shifted.jaccard == doctest::Approx(50.0).epsilon(1e-14));
  const Overlap empty = dice_jaccard(BinaryMask(3, 3), BinaryMask(3, 3));
  CHECK(empty.dice == 100.0);
  CHECK(empty.jaccard == 100.0);
  CHECK(code_of([] { dice_jaccard(BinaryMask(3, 3), BinaryMask(3, 4)); }) == Errc::DimMismatch);
}

TEST_CASE("surface distance examples") {
  const BinaryMask a = block(8, 8, 2, 2, 4);
  const SurfaceDistances same = surface_distances(a, a);
  for (double d : same.pred_to_gt) CHECK(d == 0.0);
  for (double d : same.gt_to_pred) CHECK(d == 0.0);

  BinaryMask gt(5, 5);
  gt.set(2, 2, true);
  BinaryMask pred(5, 5);
  pred.set(2, 4, true);
  const SurfaceDistances d = surface_distances(pred, gt);
  CHECK(d.pred_to_gt == std::vector<double>{2.0});
  CHECK(d.gt_to_pred == std::vector<double>{2.0});

  CHECK(code_of([&] { surface_distances(BinaryMask(5, 5), gt); }) == Errc::EmptyForeground);
  CHECK(code_of([&] { surface_distances(pred, BinaryMask(5, 5)); }) == Errc::EmptyForeground);
}

TEST_CASE("asd examples") {
  CHECK(asd(std::vector{0.0, 0.0}, std::vector{0.0}) == 0.0);
  CHECK(asd(std::vector{2.0}, std::vector{2.0}) == 2.0);
  CHECK(asd(std::vector{1.0, 3.0}, std::vector{2.0}) == 2.0);
  CHECK(code_of([] { asd(std::vector<double>{}, std::vector{1.0}); }) == Errc::EmptyList);
}

TEST_CASE("hd95 uses the nearest rank") {
  std::vector<double> twenty(19, 0.0);
  twenty.push_back(10.0);
  CHECK(percentile95(twenty) == 0.0);
  CHECK(hd95(twenty, std::vector{0.0}) == 0.0);
  // 21 values: rank ceil(0.95 * 21) = 20 picks the first of two tens.
  std::vector<double> twentyone(19, 0.0);
  twentyone.push_back(10.0);
  twentyone.push_back(10.0);
  CHECK(percentile95(twentyone) == 10.0);
  CHECK(hd95(std::vector{0.0}, twentyone) == 10.0);
  CHECK(hd95(std::vector{3.0}, std::vector{5.0}) == 5.0);
  CHECK(hd95(std::vector{0.0}, std::vector{0.0}) == 0.0);
  CHECK(code_of([] { hd95(std::vector{1.0}, std::vector<double>{}); }) == Errc::EmptyList);
  CHECK(code_of([] { percentile95(std::vector<double>{}); }) == Errc::EmptyList);
}

TEST_CASE("classification report examples") {
  const ClassReport perfect = classification_report(ConfusionMatrix(2, {50, 0, 0, 50}));
  CHECK(perfect.accuracy == 100.0);
  CHECK(perfect.kappa == 100.0);

  const ClassReport chance = classification_report(ConfusionMatrix(2, {25, 25, 25, 25}));
  CHECK(chance.accuracy == 50.0);
  CHECK(chance.kappa == 0.0);

  // Marginals: rows 10,10,10 and columns 10,9,11, so chance agreement is
  // (100 + 90 + 110) / 900 = 1/3 and kappa = (0.8 - 1/3) / (2/3) = 70.
  const ClassReport three = classification_report(ConfusionMatrix(3, {8, 1, 1, 2, 7, 1, 0, 1, 9}));
  CHECK(three.accuracy == doctest::Approx(80.0).epsilon(1e-14));
  CHECK(three.kappa == doctest::Approx(kappa_oracle({{8, 1, 1}, {2, 7, 1}, {0, 1, 9}})).epsilon(1e-13));
  CHECK(three.kappa == doctest::Approx(70.0).epsilon(1e-12));
  CHECK(three.per_class[0].precision == doctest::Approx(80.0).epsilon(1e-14));
  CHECK(three.per_class[1].precision == doctest::Approx(700.0 / 9).epsilon(1e-14));
  CHECK(three.per_class[2].recall == doctest::Approx(90.0).epsilon(1e-14));
  CHECK(three.support == std::vector<std::int64_t>{10, 10, 10});
}

TEST_CASE("classification report errors") {
  CHECK(code_of([] { classification_report(ConfusionMatrix(2)); }) == Errc::EmptyMatrix);
  CHECK(code_of([] { classification_report(ConfusionMatrix(2, {5, 0, 0, 0})); }) == Errc::DegenerateKappa);
  CHECK(code_of([] { ConfusionMatrix(2).add(2, 0); }) == Errc::LabelOutOfRange);
  CHECK(code_of([] { ConfusionMatrix(2, {1, 2, 3}); }) == Errc::DimMismatch);
}

TEST_CASE("empty predictions are scored without distances") {
  const SampleScore s = score_sample("x", BinaryMask(4, 4), block(4, 4, 1, 1, 2));
  CHECK(s.overlap.dice == 0.0);
  CHECK_FALSE(s.asd.has_value());
  CHECK_FALSE(s.both_empty);
  const SampleScore e = score_sample("y", BinaryMask(4, 4), BinaryMask(4, 4));
  CHECK(e.both_empty);
  CHECK(e.overlap.dice == 100.0);
  const SegSummary sum = summarize(std::vector{s, e});
  CHECK(sum.distance_errors == 2);
  CHECK(sum.mean.dice == 50.0);
}

TEST_CASE("segmentation csv format") {
  const BinaryMask a = block(6, 6, 1, 1, 3);
  std::ostringstream os;
  write_segmentation_csv(os, std::vector{score_sample("s1", a, a), score_sample("s2", BinaryMask(6, 6), a)});
  std::istringstream is(os.str());
  std::string line;
  std::getline(is, line);
  CHECK(line == "sample,dice,jaccard,asd,hd95");
  std::getline(is, line);
  CHECK(line.rfind("s1,100", 0) == 0);
  std::getline(is, line);
  CHECK(line.find(",NA,NA") != std::string::npos);
  std::getline(is, line);
  CHECK(line.rfind("mean\xC2\xB1std,", 0) == 0);
}

TEST_CASE("classification csv has the macro, weighted, accuracy and kappa rows") {
  std::ostringstream os;
  const std::vector<std::string> names{"a", "b", "c"};
  write_classification_csv(os, classification_report(ConfusionMatrix(3, {8, 1, 1, 2, 7, 1, 0, 1, 9})), names);
  const std::string csv = os.str();
  CHECK(csv.rfind("class,precision,recall,f1,support\na,", 0) == 0);
  for (const char* row : {"\nmacro avg,", "\nweighted avg,", "\naccuracy,,,80", "\nkappa,,,70"}) {
    CHECK(csv.find(row) != std::string::npos);
  }
}

TEST_CASE("property: jaccard = dice / (2 - dice)") {
  std::mt19937_64 rng(41);
  for (int trial = 0; trial < 200; ++trial) {
    const BinaryMask a = test::random_nonempty(16, 16, rng);
    const BinaryMask b = test::random_nonempty(16, 16, rng);
    const Overlap o = dice_jaccard(a, b);
    const double d = o.dice / 100.0;
    CHECK(std::abs(o.jaccard / 100.0 - d / (2.0 - d)) < 1e-9);
    CHECK(o.jaccard <= o.dice);
  }
}

TEST_CASE("property: surface distances match the pairwise oracle; asd and hd95 are symmetric") {
  std::mt19937_64 rng(42);
  for (int trial = 0; trial < 50; ++trial) {
    const BinaryMask a = test::random_nonempty(32, 32, rng);
    const BinaryMask b = test::random_nonempty(32, 32, rng);
    const SurfaceDistances d = surface_distances(a, b);
    const auto [pg, gp] = test::naive_surface(a, b);
    REQUIRE(d.pred_to_gt.size() == pg.size());
    REQUIRE(d.gt_to_pred.size() == gp.size());
    CHECK(test::max_abs_diff(d.pred_to_gt, pg) < 1e-9);
    CHECK(test::max_abs_diff(d.gt_to_pred, gp) < 1e-9);
    const SurfaceDistances r = surface_distances(b, a);
    CHECK(asd(d.pred_to_gt, d.gt_to_pred) == doctest::Approx(asd(r.pred_to_gt, r.gt_to_pred)).epsilon(1e-12));
    CHECK(hd95(d.pred_to_gt, d.gt_to_pred) == hd95(r.pred_to_gt, r.gt_to_pred));
    const double hausdorff = std::max(*std::max_element(pg.begin(), pg.end()), *std::max_element(gp.begin(), gp.end()));
    CHECK(hd95(d.pred_to_gt, d.gt_to_pred) <= hausdorff);
  }
}

TEST_CASE("property: accuracy equals weighted recall and kappa never exceeds accuracy") {
  std::mt19937_64 rng(43);
  for (int trial = 0; trial < 200; ++trial) {
    const int k = 2 + static_cast<int>(rng() % 4);
    std::vector<std::int64_t> counts(static_cast<std::size_t>(k * k));
    for (auto& c : counts) c = static_cast<std::int64_t>(rng() % 20);
    counts[0] += 1;
    counts[1] += 1;  // keeps chance agreement below 1
    const ClassReport r = classification_report(ConfusionMatrix(k, counts));
    CHECK(std::abs(r.accuracy - r.weighted_avg.recall) < 1e-9);
    CHECK(r.kappa <= r.accuracy + 1e-9);
    std::int64_t support = 0;
    for (auto s : r.support) support += s;
    std::int64_t total = 0;
    for (auto c : counts) total += c;
    CHECK(support == total);
  }
}
