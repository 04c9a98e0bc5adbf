// End-to-end acceptance checks. Prints one PASS/FAIL line per criterion and
// exits non-zero if any selected criterion fails.
//
//   bsda_acceptance [--only NAME]... [--work DIR] [--list]

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <iostream>
#include <map>
#include <numeric>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "bsda/dataset.hpp"
#include "bsda/distance.hpp"
#include "bsda/error.hpp"
#include "bsda/gradcheck.hpp"
#include "bsda/heatmap.hpp"
#include "bsda/io.hpp"
#include "bsda/metrics.hpp"
#include "bsda/model.hpp"
#include "bsda/synth.hpp"
#include "bsda/train.hpp"
#include "cli.hpp"
#include "support.hpp"

namespace fs = std::filesystem;
using namespace bsda;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

fs::path g_work;

// ---------------------------------------------------------------------------
// Shared data and training runs

const SynthConfig& default_synth() {
  static const SynthConfig cfg{};
  return cfg;
}

/// The default synthetic dataset, written to disk and read back as the CLI would.
const std::vector<Sample>& default_dataset() {
  static const std::vector<Sample> data = [] {
    const fs::path dir = g_work / "synth-default";
    fs::remove_all(dir);
    gen_dataset(default_synth(), dir);
    return load_dataset(dir);
  }();
  return data;
}

/// Toy-scale training settings: published architecture and loss weights, 60
/// epochs and learning rates raised for the short schedule.
BsdaConfig toy_config(std::uint64_t seed) {
  BsdaConfig cfg;
  cfg.epochs = 60;
  cfg.lr_seg = 1e-3;
  cfg.lr_cls = 2e-4;
  cfg.seed = seed;
  return cfg;
}

// Full is the jointly trained model; Segmentor keeps B and D but drops the
// classifier; SingleTask is the encoder with S alone.
enum class Variant { Full, Segmentor, SingleTask, NoFusion };

const char* variant_name(Variant v) {
  switch (v) {
    case Variant::Full: return "full";
    case Variant::Segmentor: return "no-classifier";
    case Variant::SingleTask: return "single-task";
    case Variant::NoFusion: return "no-fusion";
  }
  return "?";
}

struct RunResult {
  SegSummary seg;
  double accuracy = 0.0;
  double seconds = 0.0;
};

const RunResult& training_run(Variant variant, std::uint64_t seed) {
  static std::map<std::pair<int, std::uint64_t>, RunResult> cache;
  const auto key = std::make_pair(static_cast<int>(variant), seed);
  if (auto it = cache.find(key); it != cache.end()) return it->second;

  BsdaConfig cfg = toy_config(seed);
  if (variant == Variant::Segmentor) {
    cfg.ablation.classifier = false;
  } else if (variant == Variant::SingleTask) {
    cfg.ablation.boundary_branch = false;
    cfg.ablation.distance_branch = false;
    cfg.ablation.classifier = false;
  } else if (variant == Variant::NoFusion) {
    cfg.ablation.fusion = false;
  }

  const auto& data = default_dataset();
  const auto t0 = Clock::now();
  BsdaModel model(cfg, cfg.seed);
  const auto train_split = select_split(data, Split::Train);
  const std::vector<TrainingSample> prepared = prepare_samples(train_split, cfg);
  train(model, prepared);
  const auto test_split = select_split(data, Split::Test);
  const auto preds = predict(model, test_split);
  const Evaluation ev = evaluate(preds, test_split, cfg.classes);
  RunResult r;
  r.seconds = seconds_since(t0);
  r.seg = ev.segmentation;
  if (ev.classification) r.accuracy = ev.classification->accuracy;
  std::printf("  [%s seed %llu] dice %.2f hd95 %.2f accuracy %.2f (%.0fs)\n", variant_name(variant),
              static_cast<unsigned long long>(seed), r.seg.mean.dice, r.seg.mean.hd95, r.accuracy, r.seconds);
  std::fflush(stdout);
  return cache.emplace(key, r).first->second;
}

constexpr std::uint64_t kSeeds[] = {1, 2, 3};

// ---------------------------------------------------------------------------
// Criteria

Outcome sdm_oracle() {
  std::mt19937_64 rng(101);
  const auto t0 = Clock::now();
  double worst = 0.0;
  int count = 0;
  for (const auto [size, n] : {std::pair{32, 100}, std::pair{64, 20}}) {
    for (int i = 0; i < n; ++i) {
      const BinaryMask m = test::random_nonempty(size, size, rng);
      worst = std::max(worst, test::max_abs_diff(compute_sdm(m).values(), brute_force_sdm(m).values()));
      ++count;
    }
  }
  const double t = seconds_since(t0);
  return {worst <= 1e-9 && t < 30.0, fmt("%d masks, max diff %.3e, %.2fs", count, worst, t)};
}

Outcome sdm_range() {
  int checked = 0;
  int bad = 0;
  for (const Sample& s : default_dataset()) {
    const ScalarField n = normalize_sdm(compute_sdm(s.mask));
    const bool two_sided = s.mask.count() > 0 && s.mask.count() < s.mask.size();
    if (two_sided && (n.min() != -1.0 || n.max() != 1.0)) ++bad;
    const BoundarySet boundary = extract_boundary(s.mask);
    for (const Pixel& p : boundary.points()) {
      if (n.at(p.row, p.col) != 0.0) ++bad;
    }
    ++checked;
  }
  return {bad == 0 && checked > 0, fmt("%d synthetic masks, %d violations", checked, bad)};
}

Outcome heatmap_algebra() {
  std::mt19937_64 rng(102);
  double perm = 0.0;
  int bad = 0;
  for (int set = 0; set < 50; ++set) {
    const int h = std::uniform_int_distribution<int>(1, 12)(rng);
    const int w = std::uniform_int_distribution<int>(1, 12)(rng);
    const int k = std::uniform_int_distribution<int>(1, 6)(rng);
    std::vector<ScalarField> fields;
    for (int i = 0; i < k; ++i) fields.push_back(test::random_unit_field(h, w, rng));
    const ScalarField base = heatsum(fields);
    std::vector<ScalarField> shuffled = fields;
    std::shuffle(shuffled.begin(), shuffled.end(), rng);
    perm = std::max(perm, test::max_abs_diff(base.values(), heatsum(shuffled).values()));

    std::vector<ScalarField> with_zero = fields;
    with_zero.push_back(ScalarField(h, w));
    if (!(heatsum(with_zero) == base)) ++bad;
    for (std::size_t i = 0; i < base.size(); ++i) {
      double hi = 0.0;
      double sum = 0.0;
      for (const auto& f : fields) {
        hi = std::max(hi, f.values()[i]);
        sum += f.values()[i];
      }
      if (base.values()[i] < hi - 1e-15 || base.values()[i] > std::min(1.0, sum) + 1e-15) ++bad;
    }
  }
  int maps = 0;
  for (const Sample& s : default_dataset()) {
    const ScalarField hm = boundary_heatmap(s.mask);
    if (hm.max() != 1.0 || hm.min() < 0.0) ++bad;
    ++maps;
  }
  return {perm <= 1e-12 && bad == 0,
          fmt("50 sets, permutation diff %.3e, %d heatmaps, %d violations", perm, maps, bad)};
}

Outcome metric_identities() {
  std::mt19937_64 rng(103);
  double jac = 0.0;
  for (int i = 0; i < 200; ++i) {
    const BinaryMask a = test::random_mask(24, 24, 0.4, rng);
    const BinaryMask b = test::random_mask(24, 24, 0.4, rng);
    const Overlap o = dice_jaccard(a, b);
    const double d = o.dice / 100.0;
    jac = std::max(jac, std::abs(o.jaccard / 100.0 - d / (2.0 - d)));
  }
  double oracle = 0.0;
  double sym = 0.0;
  for (int i = 0; i < 50; ++i) {
    const BinaryMask a = test::random_nonempty(32, 32, rng);
    const BinaryMask b = test::random_nonempty(32, 32, rng);
    const SurfaceDistances ab = surface_distances(a, b);
    const SurfaceDistances ba = surface_distances(b, a);
    const auto [pg, gp] = test::naive_surface(a, b);
    if (pg.size() != ab.pred_to_gt.size() || gp.size() != ab.gt_to_pred.size()) return {false, "surface size mismatch"};
    oracle = std::max({oracle, test::max_abs_diff(ab.pred_to_gt, pg), test::max_abs_diff(ab.gt_to_pred, gp)});
    sym = std::max({sym, std::abs(asd(ab.pred_to_gt, ab.gt_to_pred) - asd(ba.pred_to_gt, ba.gt_to_pred)),
                    std::abs(hd95(ab.pred_to_gt, ab.gt_to_pred) - hd95(ba.pred_to_gt, ba.gt_to_pred))});
  }
  return {jac <= 1e-9 && oracle <= 1e-9 && sym <= 1e-12,
          fmt("jaccard identity %.3e over 200, oracle %.3e and symmetry %.3e over 50", jac, oracle, sym)};
}

Outcome gradient_suite() {
  const auto t0 = Clock::now();
  GradcheckSuiteOptions opts;
  opts.seeds = 10;
  const auto results = run_gradcheck_suite(opts);
  const double t = seconds_since(t0);
  bool ok = t < 120.0 && !results.empty();
  double worst_ratio = 0.0;
  std::string failed;
  for (const GradcheckResult& r : results) {
    const double limit = r.name.rfind("batchnorm", 0) == 0 ? 1e-3 : 1e-4;
    const bool pass = r.passed && r.max_error < limit && r.seeds >= 10;
    if (!pass) failed += " " + r.name;
    ok = ok && pass;
    worst_ratio = std::max(worst_ratio, r.max_error / limit);
  }
  return {ok, fmt("%zu cases x 10 seeds, worst error/limit %.2e, %.1fs%s", results.size(), worst_ratio, t,
                  failed.empty() ? "" : (", failed:" + failed).c_str())};
}

Outcome schedule() {
  BsdaConfig cfg = toy_config(11);
  cfg.tau = 20;
  cfg.epochs = 25;
  const auto train_split = select_split(default_dataset(), Split::Train);
  // A stratified slice keeps the 25 epochs quick without changing the contract.
  std::vector<const Sample*> slice;
  for (std::size_t i = 0; i < train_split.size(); i += 7) slice.push_back(train_split[i]);
  const std::vector<TrainingSample> prepared = prepare_samples(slice, cfg);

  BsdaModel model(cfg, cfg.seed);
  const auto cls = model.classifier_parameters();
  const std::uint64_t initial = parameter_checksum(cls);
  std::vector<std::uint64_t> after;
  train(model, prepared, [&](BsdaModel& m, const TrainState&) {
    after.push_back(parameter_checksum(m.classifier_parameters()));
  });
  int first_change = 0;
  for (std::size_t e = 0; e < after.size(); ++e) {
    if (after[e] != initial) {
      first_change = static_cast<int>(e) + 1;
      break;
    }
  }
  const bool unchanged = std::all_of(after.begin(), after.begin() + std::min<std::size_t>(20, after.size()),
                                     [&](std::uint64_t c) { return c == initial; });
  const bool ok = after.size() == 25 && unchanged && after.back() != initial;
  return {ok, fmt("%zu classifier tensors, first change after epoch %d", cls.size(), first_change)};
}

Outcome training() {
  const RunResult& r = training_run(Variant::Full, kSeeds[0]);
  const bool ok = r.seg.mean.dice >= 90.0 && r.accuracy >= 85.0 && r.seconds < 20 * 60.0;
  return {ok, fmt("test dice %.2f accuracy %.2f in %.0fs", r.seg.mean.dice, r.accuracy, r.seconds)};
}

double mean_over_seeds(Variant v, const std::function<double(const RunResult&)>& get) {
  double s = 0.0;
  for (std::uint64_t seed : kSeeds) s += get(training_run(v, seed));
  return s / std::size(kSeeds);
}

Outcome ablation() {
  // Segmentation ablation: S with the B and D branches against S alone, both
  // without the classifier. The joint model is reported alongside.
  const auto dice = [](const RunResult& r) { return r.seg.mean.dice; };
  const auto hd = [](const RunResult& r) { return r.seg.mean.hd95; };
  const double seg_dice = mean_over_seeds(Variant::Segmentor, dice);
  const double base_dice = mean_over_seeds(Variant::SingleTask, dice);
  const double seg_hd = mean_over_seeds(Variant::Segmentor, hd);
  const double base_hd = mean_over_seeds(Variant::SingleTask, hd);
  const double joint_dice = mean_over_seeds(Variant::Full, dice);
  const double joint_hd = mean_over_seeds(Variant::Full, hd);
  const bool ok = seg_dice >= base_dice - 0.3 && seg_hd <= base_hd;
  return {ok, fmt("dice S+B+D %.2f vs S %.2f, hd95 S+B+D %.3f vs S %.3f (joint model: dice %.2f, hd95 %.3f)", seg_dice,
                  base_dice, seg_hd, base_hd, joint_dice, joint_hd)};
}

Outcome joint_learning() {
  const double fused = mean_over_seeds(Variant::Full, [](const RunResult& r) { return r.accuracy; });
  const double plain = mean_over_seeds(Variant::NoFusion, [](const RunResult& r) { return r.accuracy; });
  return {fused >= plain, fmt("accuracy with fusion %.2f vs without %.2f", fused, plain)};
}

Outcome determinism() {
  const fs::path root = g_work / "determinism";
  fs::remove_all(root);
  std::ostringstream out;
  std::ostringstream err;
  const auto run = [&](std::vector<std::string> args) {
    const int code = cli::run(std::move(args), out, err);
    if (code != 0) throw std::runtime_error("bsda exited " + std::to_string(code) + ": " + err.str());
  };
  run({"synth", "--seed", "5", "--n-per-class", "4", "--out", (root / "data").string()});
  io::write_file(root / "run.json", R"({"epochs": 3, "tau": 1, "batch_size": 4, "lr_seg": 0.001, "lr_cls": 0.0002})");
  for (const char* name : {"a", "b"}) {
    run({"train", "--seed", "9", "--quiet", "--config", (root / "run.json").string(), "--data",
         (root / "data").string(), "--out", (root / name).string()});
  }
  const bool ckpt = io::read_file(root / "a" / "checkpoint.bsdc") == io::read_file(root / "b" / "checkpoint.bsdc");
  const bool hist = io::read_file(root / "a" / "history.csv") == io::read_file(root / "b" / "history.csv");
  return {ckpt && hist, fmt("checkpoint %s, history %s", ckpt ? "identical" : "DIFFERS", hist ? "identical" : "DIFFERS")};
}

Outcome formats() {
  std::mt19937_64 rng(104);
  const fs::path dir = g_work / "formats";
  fs::create_directories(dir);
  std::uniform_int_distribution<int> dim(1, 40);
  std::uniform_int_distribution<int> byte(0, 255);
  std::normal_distribution<double> value(0.0, 100.0);
  const auto rewrite = [&](const fs::path& p, const std::string& bytes, auto decode, auto encode) {
    io::write_file(p, bytes);
    return encode(decode(io::read_file(p))) == bytes;
  };
  const auto random_tensor = [&] {
    io::TensorFile t;
    t.dtype = byte(rng) % 2 ? io::DType::F64 : io::DType::F32;
    const int rank = std::uniform_int_distribution<int>(0, 4)(rng);
    std::size_t n = 1;
    for (int r = 0; r < rank; ++r) {
      t.dims.push_back(static_cast<std::uint32_t>(std::uniform_int_distribution<int>(1, 6)(rng)));
      n *= t.dims.back();
    }
    for (std::size_t i = 0; i < n; ++i) {
      const double v = value(rng);
      t.values.push_back(t.dtype == io::DType::F32 ? static_cast<double>(static_cast<float>(v)) : v);
    }
    return t;
  };
  int bad = 0;
  for (int i = 0; i < 50; ++i) {
    io::Gray8 g{dim(rng), dim(rng), {}};
    for (int k = 0; k < g.height * g.width; ++k) g.pixels.push_back(static_cast<std::uint8_t>(byte(rng)));
    if (!rewrite(dir / "a.pgm", io::encode_pgm(g), io::parse_pgm, io::encode_pgm)) ++bad;

    const auto decode_one = [](const std::string& s) { return io::decode_bsdt(s); };
    if (!rewrite(dir / "a.bsdt", io::encode_bsdt(random_tensor()), decode_one, io::encode_bsdt)) ++bad;

    std::vector<io::NamedTensorFile> records;
    const int k = std::uniform_int_distribution<int>(0, 5)(rng);
    for (int r = 0; r < k; ++r) records.push_back({"t" + std::to_string(r) + "." + std::to_string(byte(rng)), random_tensor()});
    const auto encode_list = [](const std::vector<io::NamedTensorFile>& v) { return io::encode_bsdc(v); };
    if (!rewrite(dir / "a.bsdc", io::encode_bsdc(records), io::decode_bsdc, encode_list)) ++bad;
  }
  return {bad == 0, fmt("50 each of PGM, BSDT, BSDC; %d mismatches", bad)};
}

struct Criterion {
  const char* name;
  Outcome (*run)();
};

const std::vector<Criterion>& criteria() {
  static const std::vector<Criterion> all{
      {"sdm_oracle", sdm_oracle},         {"sdm_range", sdm_range},       {"heatmap_algebra", heatmap_algebra},
      {"metric_identities", metric_identities}, {"gradient_suite", gradient_suite}, {"schedule", schedule},
      {"training", training},             {"ablation", ablation},         {"joint_learning", joint_learning},
      {"determinism", determinism},       {"formats", formats},
  };
  return all;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"BSDA acceptance checks"};
  std::vector<std::string> only;
  std::string work = (fs::temp_directory_path() / "bsda-acceptance").string();
  bool list = false;
  app.add_option("--only", only, "Run just these criteria");
  app.add_option("--work", work, "Scratch directory")->capture_default_str();
  app.add_flag("--list", list, "List criterion names");
  CLI11_PARSE(app, argc, argv);

  if (list) {
    for (const auto& c : criteria()) std::cout << c.name << '\n';
    return 0;
  }
  for (const auto& name : only) {
    const bool known = std::any_of(criteria().begin(), criteria().end(),
                                   [&](const Criterion& c) { return name == c.name; });
    if (!known) {
      std::cerr << "unknown criterion '" << name << "'\n";
      return 1;
    }
  }
  g_work = work;
  fs::create_directories(g_work);

  int failures = 0;
  for (const auto& c : criteria()) {
    if (!only.empty() && std::find(only.begin(), only.end(), c.name) == only.end()) continue;
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("threw: ") + e.what()};
    }
    if (!o.pass) ++failures;
    std::printf("%s %s: %s\n", o.pass ? "PASS" : "FAIL", c.name, o.detail.c_str());
    std::fflush(stdout);
  }
  return failures == 0 ? 0 : 1;
}
