#include "cli.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>
#include <ostream>
#include <sstream>

#include "CLI11.hpp"

#include "bsda/config.hpp"
#include "bsda/dataset.hpp"
#include "bsda/distance.hpp"
#include "bsda/error.hpp"
#include "bsda/gradcheck.hpp"
#include "bsda/heatmap.hpp"
#include "bsda/io.hpp"
#include "bsda/model.hpp"
#include "bsda/synth.hpp"
#include "bsda/train.hpp"

namespace bsda::cli {

namespace fs = std::filesystem;

namespace {

std::string fmt(const char* format, double value) {
  char buf[64];
  std::snprintf(buf, sizeof buf, format, value);
  return buf;
}

int exit_code(const Error& e) {
  switch (e.code()) {
    case Errc::IoError:
    case Errc::FormatError:
    case Errc::DataEmpty:
    case Errc::DimMismatch:
      return kIo;
    case Errc::InvalidMask:
    case Errc::EmptyForeground:
      return kBadMask;
    case Errc::ConfigInvalid:
    case Errc::InvalidSigma:
      return kConfig;
    case Errc::ShapeMismatch:
      return kCheckpoint;
    default:
      return kIo;
  }
}

void ensure_directory(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) {
    throw Error(Errc::IoError, "cannot create directory " + dir.string() + (ec ? ": " + ec.message() : ""));
  }
}

struct Globals {
  std::uint64_t seed = 0;
  CLI::Option* seed_opt = nullptr;
  std::string config;
  std::string out;
};

// ---- synth ----------------------------------------------------------------

struct SynthArgs {
  std::optional<int> n_per_class;
  std::optional<int> image_size;
};

int cmd_synth(const Globals& g, const SynthArgs& a, std::ostream& out) {
  if (g.out.empty()) throw CLI::RequiredError("--out");
  SynthConfig cfg = g.config.empty() ? SynthConfig{} : synth_config_from_json(read_json_file(g.config));
  if (g.seed_opt->count()) cfg.seed = g.seed;
  if (a.n_per_class) cfg.n_per_class = *a.n_per_class;
  if (a.image_size) cfg.image_size = *a.image_size;
  cfg.validate();
  gen_dataset(cfg, g.out);
  int counts[3] = {0, 0, 0};
  for (const ManifestRow& row : plan_dataset(cfg)) ++counts[static_cast<int>(row.split)];
  out << "wrote " << counts[0] + counts[1] + counts[2] << " samples to " << g.out << " (train " << counts[0]
      << ", val " << counts[1] << ", test " << counts[2] << ")\n";
  return kOk;
}

// ---- targets --------------------------------------------------------------

struct TargetArgs {
  std::string masks;
  double sigma = 2.0;
  double floor = 0.001;
  bool oracle = false;
};

int cmd_targets(const Globals& g, const TargetArgs& a, std::ostream& out, std::ostream& err) {
  if (g.out.empty()) throw CLI::RequiredError("--out");
  const HeatmapParams params{a.sigma, a.floor};
  params.validate();
  if (!fs::is_directory(a.masks)) throw Error(Errc::IoError, "mask directory not found: " + a.masks);
  ensure_directory(g.out);
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(a.masks)) {
    if (entry.is_regular_file() && entry.path().extension() == ".pgm") files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end());
  int failures = 0;
  double worst_oracle = 0.0;
  for (const fs::path& file : files) {
    const std::string id = file.stem().string();
    try {
      const BinaryMask mask = io::read_mask(file);
      const ScalarField raw = compute_sdm(mask);
      const ScalarField sdm = normalize_sdm(raw);
      const ScalarField bd = boundary_heatmap(mask, params);
      io::write_field(fs::path(g.out) / (id + ".sdm.bsdt"), sdm);
      io::write_field(fs::path(g.out) / (id + ".bd.bsdt"), bd);
      out << id << " sdm min " << fmt("%.6f", sdm.min()) << " max " << fmt("%.6f", sdm.max()) << " bd min "
          << fmt("%.6f", bd.min()) << " max " << fmt("%.6f", bd.max());
      if (a.oracle) {
        const ScalarField brute = brute_force_sdm(mask);
        double diff = 0.0;
        for (std::size_t i = 0; i < raw.size(); ++i) diff = std::max(diff, std::abs(raw.values()[i] - brute.values()[i]));
        worst_oracle = std::max(worst_oracle, diff);
        out << " oracle max_abs_diff " << fmt("%.3e", diff);
      }
      out << "\n";
    } catch (const Error& e) {
      if (e.code() == Errc::IoError) throw;
      err << "error: " << file.string() << ": " << e.what() << "\n";
      ++failures;
    }
  }
  out << files.size() - static_cast<std::size_t>(failures) << " of " << files.size() << " masks processed\n";
  if (a.oracle) out << "oracle max_abs_diff " << fmt("%.3e", worst_oracle) << "\n";
  if (failures > 0) {
    err << failures << " mask(s) failed\n";
    return kBadMask;
  }
  if (a.oracle && !(worst_oracle < 1e-9)) return kVerification;
  return kOk;
}

// ---- train ----------------------------------------------------------------

struct TrainArgs {
  std::string data;
  std::vector<std::string> ablate;
  std::optional<int> epochs;
  bool quiet = false;
};

struct RunConfig {
  BsdaConfig model;
  std::string data;
  std::string out;
};

RunConfig load_run_config(const std::string& path) {
  RunConfig rc;
  if (path.empty()) return rc;
  Json j = read_json_file(path);
  for (const char* key : {"data", "out"}) {
    if (!j.contains(key)) continue;
    if (!j[key].is_string()) throw Error(Errc::ConfigInvalid, std::string("key '") + key + "' must be a string");
    (std::string(key) == "data" ? rc.data : rc.out) = j[key].get<std::string>();
    j.erase(key);
  }
  rc.model = bsda_config_from_json(j);
  return rc;
}

void apply_ablation(BsdaConfig& cfg, const std::string& flag) {
  Ablation& a = cfg.ablation;
  if (flag == "no-b") {
    a.boundary_branch = false;
  } else if (flag == "no-d") {
    a.distance_branch = false;
  } else if (flag == "no-cls") {
    a.classifier = false;
  } else if (flag == "single-task") {
    a.boundary_branch = a.distance_branch = a.classifier = false;
  } else if (flag == "no-fusion") {
    a.fusion = false;
  } else {
    throw CLI::ValidationError("--ablate", "unknown ablation '" + flag + "'");
  }
}

int cmd_train(const Globals& g, const TrainArgs& a, std::ostream& out) {
  RunConfig rc = load_run_config(g.config);
  BsdaConfig cfg = rc.model;
  if (g.seed_opt->count()) cfg.seed = g.seed;
  if (a.epochs) cfg.epochs = *a.epochs;
  for (const std::string& flag : a.ablate) apply_ablation(cfg, flag);
  const std::string data = a.data.empty() ? rc.data : a.data;
  const std::string out_dir = g.out.empty() ? rc.out : g.out;
  if (data.empty()) throw CLI::RequiredError("--data");
  if (out_dir.empty()) throw CLI::RequiredError("--out");
  cfg.validate();

  const std::vector<Sample> samples = load_dataset(data);
  const std::vector<const Sample*> train_set = select_split(samples, Split::Train);
  if (train_set.empty()) throw Error(Errc::DataEmpty, "dataset has no training samples");
  ensure_directory(out_dir);
  io::write_file(fs::path(out_dir) / "config.json", dump_json(to_json(cfg)));

  BsdaModel model(cfg, cfg.seed);
  const std::vector<TrainingSample> prepared = prepare_samples(train_set, cfg);
  const auto start = std::chrono::steady_clock::now();
  const TrainState state = train(model, prepared, [&](BsdaModel&, const TrainState& s) {
    if (a.quiet) return;
    const EpochRecord& r = s.history.back();
    const double elapsed = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    out << "epoch " << r.epoch << "/" << cfg.epochs << " l_seg " << fmt("%.4f", r.l_seg) << " dice "
        << fmt("%.4f", r.l_dice) << " bd " << fmt("%.4f", r.l_bd) << " sd " << fmt("%.4f", r.l_sd) << " cl "
        << fmt("%.4f", r.l_cl) << (r.frozen ? " frozen" : "") << " " << fmt("%.0fs", elapsed) << "\n";
    out.flush();
  });
  std::ostringstream history;
  write_history_csv(history, state.history);
  io::write_file(fs::path(out_dir) / "history.csv", history.str());
  io::save_checkpoint(fs::path(out_dir) / "checkpoint.bsdc", model);
  out << "wrote " << (fs::path(out_dir) / "checkpoint.bsdc").string() << "\n";
  return kOk;
}

// ---- eval -----------------------------------------------------------------

struct EvalArgs {
  std::string checkpoint;
  std::string data;
  std::string split = "test";
  bool oracle_gt = false;
};

int cmd_eval(const Globals& g, const EvalArgs& a, std::ostream& out) {
  if (g.out.empty()) throw CLI::RequiredError("--out");
  if (a.data.empty()) throw CLI::RequiredError("--data");
  if (a.checkpoint.empty() && !a.oracle_gt) throw CLI::RequiredError("--checkpoint");
  const Split split = parse_split(a.split);

  std::string config_path = g.config;
  if (config_path.empty() && !a.checkpoint.empty()) {
    const fs::path beside = fs::path(a.checkpoint).parent_path() / "config.json";
    if (fs::exists(beside)) config_path = beside.string();
  }
  const BsdaConfig cfg = load_run_config(config_path).model;

  const std::vector<Sample> samples = load_dataset(a.data);
  const std::vector<const Sample*> subset = select_split(samples, split);
  if (subset.empty()) throw Error(Errc::DataEmpty, "split '" + a.split + "' is empty");

  std::vector<Prediction> predictions;
  if (a.oracle_gt) {
    predictions = oracle_predictions(subset);
  } else {
    BsdaModel model(cfg, cfg.seed);
    try {
      io::load_checkpoint(a.checkpoint, model);
    } catch (const Error& e) {
      if (e.code() == Errc::IoError) throw;
      throw Error(Errc::ShapeMismatch, e.what());
    }
    predictions = predict(model, subset);
  }
  const Evaluation ev = evaluate(predictions, subset, cfg.classes);

  ensure_directory(g.out);
  std::ostringstream seg;
  write_segmentation_csv(seg, ev.scores);
  io::write_file(fs::path(g.out) / "segmentation.csv", seg.str());
  const SegSummary& s = ev.segmentation;
  out << a.split << " samples " << s.samples << "\n";
  out << "dice " << fmt("%.2f", s.mean.dice) << " jaccard " << fmt("%.2f", s.mean.jaccard) << " asd "
      << fmt("%.2f", s.mean.asd) << " hd95 " << fmt("%.2f", s.mean.hd95) << "\n";
  if (s.distance_errors > 0) out << "samples without surface distances " << s.distance_errors << "\n";
  if (ev.classification) {
    std::vector<std::string> names;
    for (int k = 0; k < cfg.classes; ++k) {
      names.push_back(k < kFazClasses ? std::string(class_name(static_cast<FazClass>(k))) : std::to_string(k));
    }
    std::ostringstream cls;
    write_classification_csv(cls, *ev.classification, names);
    io::write_file(fs::path(g.out) / "classification.csv", cls.str());
    out << "accuracy " << fmt("%.2f", ev.classification->accuracy) << " kappa "
        << fmt("%.2f", ev.classification->kappa) << "\n";
  }
  return kOk;
}

// ---- gradcheck ------------------------------------------------------------

struct GradcheckArgs {
  int seeds = 10;
  std::string corrupt;
  std::vector<std::string> cases;
};

int cmd_gradcheck(const Globals& g, const GradcheckArgs& a, std::ostream& out) {
  GradcheckSuiteOptions options;
  options.seed = g.seed;
  options.seeds = a.seeds;
  options.corrupt_op = a.corrupt;
  std::vector<GradcheckResult> results;
  if (a.cases.empty()) {
    results = run_gradcheck_suite(options);
  } else {
    for (const std::string& c : a.cases) results.push_back(run_gradcheck_case(c, options));
  }
  print_gradcheck_table(out, results);
  const bool ok = std::all_of(results.begin(), results.end(), [](const GradcheckResult& r) { return r.passed; });
  out << (ok ? "all gradient checks passed" : "gradient check FAILED") << "\n";
  return ok ? kOk : kVerification;
}

}  // namespace

int run(std::vector<std::string> args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Boundary and signed-distance aware segmentation and classification toolkit", "bsda"};
  app.require_subcommand(1);
  app.footer(
      "Exit codes: 0 ok, 1 usage, 2 I/O or data, 3 bad mask, 4 config, 5 checkpoint mismatch, 6 verification "
      "failed.");

  Globals g;
  g.seed_opt = app.add_option("--seed", g.seed, "Random seed (overrides the config)");
  app.add_option("--config", g.config, "JSON config file");
  app.add_option("--out", g.out, "Output directory");

  SynthArgs synth;
  auto* synth_cmd = app.add_subcommand("synth", "Generate the synthetic dataset");
  synth_cmd->add_option("--n-per-class", synth.n_per_class, "Samples per class");
  synth_cmd->add_option("--image-size", synth.image_size, "Image side length");

  TargetArgs targets;
  auto* targets_cmd = app.add_subcommand("targets", "Write SDM and boundary-heatmap targets for PGM masks");
  targets_cmd->add_option("--masks", targets.masks, "Directory of PGM masks")->required();
  targets_cmd->add_option("--sigma", targets.sigma, "Gaussian sigma in pixels")->capture_default_str();
  targets_cmd->add_option("--floor", targets.floor, "Zeroing threshold before normalisation")->capture_default_str();
  targets_cmd->add_flag("--oracle", targets.oracle, "Cross-check every SDM against the brute-force scan");

  TrainArgs train_args;
  auto* train_cmd = app.add_subcommand("train", "Train a model on the train split");
  train_cmd->add_option("--data", train_args.data, "Dataset directory");
  train_cmd->add_option("--ablate", train_args.ablate, "no-b, no-d, no-cls, single-task or no-fusion (repeatable)")
      ->check(CLI::IsMember({"no-b", "no-d", "no-cls", "single-task", "no-fusion"}));
  train_cmd->add_option("--epochs", train_args.epochs, "Override the configured epoch count");
  train_cmd->add_flag("--quiet", train_args.quiet, "No per-epoch progress");

  EvalArgs eval;
  auto* eval_cmd = app.add_subcommand("eval", "Score a checkpoint on a dataset split");
  eval_cmd->add_option("--checkpoint", eval.checkpoint, "BSDC checkpoint");
  eval_cmd->add_option("--data", eval.data, "Dataset directory")->required();
  eval_cmd->add_option("--split", eval.split, "train, val or test")
      ->check(CLI::IsMember({"train", "val", "test"}))
      ->capture_default_str();
  eval_cmd->add_flag("--oracle-gt", eval.oracle_gt, "Score the ground truth against itself");

  GradcheckArgs grad;
  auto* grad_cmd = app.add_subcommand("gradcheck", "Finite-difference checks of every differentiable op");
  grad_cmd->add_option("--seeds", grad.seeds, "Random draws per op")->capture_default_str();
  grad_cmd->add_option("--corrupt", grad.corrupt, "Scale the upstream gradient of this op (harness test)");
  grad_cmd->add_option("--case", grad.cases, "Run only these cases");

  for (CLI::App* sub : {synth_cmd, targets_cmd, train_cmd, eval_cmd, grad_cmd}) sub->fallthrough();

  try {
    std::reverse(args.begin(), args.end());
    app.parse(args);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n";
    return kUsage;
  }

  try {
    if (synth_cmd->parsed()) return cmd_synth(g, synth, out);
    if (targets_cmd->parsed()) return cmd_targets(g, targets, out, err);
    if (train_cmd->parsed()) return cmd_train(g, train_args, out);
    if (eval_cmd->parsed()) return cmd_eval(g, eval, out);
    if (grad_cmd->parsed()) return cmd_gradcheck(g, grad, out);
  } catch (const CLI::Error& e) {
    err << "error: " << e.what() << "\n";
    return kUsage;
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return exit_code(e);
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kIo;
  }
  return kUsage;
}

}  // namespace bsda::cli
