#pragma once

#include <functional>
#include <iosfwd>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "bsda/dataset.hpp"
#include "bsda/metrics.hpp"
#include "bsda/model.hpp"
#include "bsda/optim.hpp"

namespace bsda {

/// Per-epoch batch means. l_seg is the weighted segmentation objective, the
/// other segmentation columns are its unweighted terms; l_cl is 0 while the
/// classifier is frozen.
struct EpochRecord {
  int epoch = 0;
  double l_seg = 0.0;
  double l_dice = 0.0;
  double l_bd = 0.0;
  double l_sd = 0.0;
  double l_cl = 0.0;
  bool frozen = true;
};

struct TrainState {
  /// Completed epochs.
  int epoch = 0;
  ad::AdamState segmentor_opt;
  ad::AdamState classifier_opt;
  std::mt19937_64 rng;
  std::vector<EpochRecord> history;
};

/// A sample with its cached boundary heatmap and normalised SDM targets.
struct TrainingSample {
  ScalarField image;
  BinaryMask mask;
  ScalarField boundary;
  ScalarField distance;
  int label = 0;
};

TrainingSample prepare_sample(const ScalarField& image, const BinaryMask& mask, int label, const BsdaConfig& config);
std::vector<TrainingSample> prepare_samples(std::span<const Sample* const> samples, const BsdaConfig& config);

TrainState init_train_state(const BsdaConfig& config);

/// Classifier frozen during the epoch numbered `epoch` (1-based).
bool classifier_frozen(const BsdaConfig& config, int epoch) noexcept;

/// Runs one epoch and appends its record. Throws DataEmpty when no batch of at
/// least two samples can be formed.
EpochRecord train_epoch(BsdaModel& model, std::span<const TrainingSample> data, TrainState& state);

using EpochCallback = std::function<void(BsdaModel&, const TrainState&)>;

/// Trains for config.epochs epochs, calling on_epoch after each one.
TrainState train(BsdaModel& model, std::span<const TrainingSample> data, const EpochCallback& on_epoch = {});

void write_history_csv(std::ostream& os, std::span<const EpochRecord> history);

struct Prediction {
  std::string id;
  BinaryMask mask;
  std::optional<int> label;
};

/// Eval-mode forward; masks are sigmoid(p_s) >= 0.5, labels argmax of the
/// class logits when the model has a classifier.
std::vector<Prediction> predict(BsdaModel& model, std::span<const Sample* const> samples, int batch_size = 16);

/// Ground truth passed off as predictions, for checking the scoring path.
std::vector<Prediction> oracle_predictions(std::span<const Sample* const> samples);

struct Evaluation {
  std::vector<SampleScore> scores;
  SegSummary segmentation;
  std::optional<ConfusionMatrix> confusion;
  std::optional<ClassReport> classification;
};

Evaluation evaluate(std::span<const Prediction> predictions, std::span<const Sample* const> samples, int classes);

}  // namespace bsda
