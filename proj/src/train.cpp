#include "bsda/train.hpp"

#include <algorithm>
#include <cstdio>
#include <numeric>
#include <ostream>

#include "bsda/augment.hpp"
#include "bsda/distance.hpp"
#include "bsda/error.hpp"
#include "bsda/heatmap.hpp"

namespace bsda {

using ad::Graph;
using ad::Mode;
using ad::Shape;
using ad::Tensor;
using ad::Var;

namespace {

void copy_plane(Tensor& dst, int n, std::span<const double> src) {
  std::copy(src.begin(), src.end(), dst.data() + static_cast<std::size_t>(n) * src.size());
}

void copy_plane(Tensor& dst, int n, const BinaryMask& mask) {
  double* out = dst.data() + static_cast<std::size_t>(n) * mask.size();
  for (std::uint8_t c : mask.cells()) *out++ = c;
}

Tensor image_batch(std::span<const Sample* const> samples, std::size_t begin, std::size_t end) {
  const Sample& first = *samples[begin];
  Tensor t(Shape{static_cast<int>(end - begin), 1, first.image.height(), first.image.width()});
  for (std::size_t i = begin; i < end; ++i) {
    if (samples[i]->image.size() != first.image.size()) {
      throw Error(Errc::DimMismatch, "sample " + samples[i]->id + " differs in size from " + first.id);
    }
    copy_plane(t, static_cast<int>(i - begin), samples[i]->image.values());
  }
  return t;
}

int argmax_row(const Tensor& logits, int row) {
  const int k = logits.dim(1);
  const double* p = logits.data() + static_cast<std::size_t>(row) * k;
  return static_cast<int>(std::max_element(p, p + k) - p);
}

}  // namespace

TrainingSample prepare_sample(const ScalarField& image, const BinaryMask& mask, int label, const BsdaConfig& config) {
  if (image.height() != mask.height() || image.width() != mask.width()) {
    throw Error(Errc::DimMismatch, "image and mask differ in size");
  }
  return TrainingSample{image, mask, boundary_heatmap(mask, HeatmapParams{config.sigma, config.heat_floor}),
                        normalize_sdm(compute_sdm(mask)), label};
}

std::vector<TrainingSample> prepare_samples(std::span<const Sample* const> samples, const BsdaConfig& config) {
  std::vector<TrainingSample> out;
  out.reserve(samples.size());
  for (const Sample* s : samples) out.push_back(prepare_sample(s->image, s->mask, s->label, config));
  return out;
}

TrainState init_train_state(const BsdaConfig& config) {
  config.validate();
  TrainState state;
  state.segmentor_opt.options.lr = config.lr_seg;
  state.classifier_opt.options.lr = config.lr_cls;
  std::seed_seq seq{static_cast<std::uint32_t>(config.seed), static_cast<std::uint32_t>(config.seed >> 32), 0x7a1du};
  state.rng.seed(seq);
  return state;
}

bool classifier_frozen(const BsdaConfig& config, int epoch) noexcept { return epoch <= config.tau; }

EpochRecord train_epoch(BsdaModel& model, std::span<const TrainingSample> data, TrainState& state) {
  const BsdaConfig& cfg = model.config();
  const int size = cfg.image_size;
  if (data.size() < 2) throw Error(Errc::DataEmpty, "training needs at least two samples");
  for (const TrainingSample& s : data) {
    if (s.image.height() != size || s.image.width() != size) {
      throw Error(Errc::ShapeMismatch, "training image is " + std::to_string(s.image.height()) + "x" +
                                           std::to_string(s.image.width()) + ", model expects " +
                                           std::to_string(size));
    }
    if (s.label < 0 || s.label >= cfg.classes) {
      throw Error(Errc::LabelOutOfRange, "label " + std::to_string(s.label) + " outside [0, " +
                                             std::to_string(cfg.classes) + ")");
    }
  }

  EpochRecord rec;
  rec.epoch = state.epoch + 1;
  rec.frozen = classifier_frozen(cfg, rec.epoch);
  const bool classify = model.classifier.has_value() && !rec.frozen;

  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::shuffle(order.begin(), order.end(), state.rng);

  std::vector<ad::Parameter*> seg_params = model.segmentor_parameters();
  std::vector<ad::Parameter*> cls_params = model.classifier_parameters();
  int batches = 0;
  for (std::size_t begin = 0; begin < order.size(); begin += static_cast<std::size_t>(cfg.batch_size)) {
    const std::size_t end = std::min(order.size(), begin + static_cast<std::size_t>(cfg.batch_size));
    const int n = static_cast<int>(end - begin);
    // Batch norm needs two samples; a lone leftover sample is skipped.
    if (n < 2) continue;
    Tensor images(Shape{n, 1, size, size});
    SegTargets targets{Tensor(Shape{n, 1, size, size}), Tensor(Shape{n, 1, size, size}),
                       Tensor(Shape{n, 1, size, size})};
    std::vector<int> labels;
    for (int i = 0; i < n; ++i) {
      const TrainingSample& s = data[order[begin + static_cast<std::size_t>(i)]];
      labels.push_back(s.label);
      if (cfg.augment) {
        const AugmentPlan plan = draw_augment(state.rng);
        copy_plane(images, i, apply_intensity(apply_geometry(s.image, plan.geometry), plan, state.rng).values());
        copy_plane(targets.mask, i, apply_geometry(s.mask, plan.geometry));
        copy_plane(targets.boundary, i, apply_geometry(s.boundary, plan.geometry).values());
        copy_plane(targets.distance, i, apply_geometry(s.distance, plan.geometry).values());
      } else {
        copy_plane(images, i, s.image.values());
        copy_plane(targets.mask, i, s.mask);
        copy_plane(targets.boundary, i, s.boundary.values());
        copy_plane(targets.distance, i, s.distance.values());
      }
    }

    Graph g;
    Var x = g.constant(std::move(images));
    SegOutputs out = forward_segmentor(g, model, x, Mode::Train);
    SegLoss loss = seg_loss(out, targets, cfg.lambda_dice, cfg.lambda_boundary, cfg.lambda_distance);
    Var total = loss.total;
    double ce = 0.0;
    if (classify) {
      Var cl = ad::cross_entropy(fuse_and_classify(g, model, x, out, Mode::Train), labels);
      ce = cl.value()[0];
      total = ad::add(total, ad::scale(cl, cfg.lambda_cls));
    }
    for (ad::Parameter* p : seg_params) p->zero_grad();
    if (classify) {
      for (ad::Parameter* p : cls_params) p->zero_grad();
    }
    g.backward(total);
    ad::adam_step(seg_params, state.segmentor_opt);
    if (classify) ad::adam_step(cls_params, state.classifier_opt);

    rec.l_seg += loss.total.value()[0];
    rec.l_dice += loss.dice;
    rec.l_bd += loss.boundary;
    rec.l_sd += loss.distance;
    rec.l_cl += ce;
    ++batches;
  }
  if (batches == 0) throw Error(Errc::DataEmpty, "no batch of at least two samples");
  for (double* v : {&rec.l_seg, &rec.l_dice, &rec.l_bd, &rec.l_sd, &rec.l_cl}) *v /= batches;
  state.epoch = rec.epoch;
  state.history.push_back(rec);
  return rec;
}

TrainState train(BsdaModel& model, std::span<const TrainingSample> data, const EpochCallback& on_epoch) {
  TrainState state = init_train_state(model.config());
  for (int e = 0; e < model.config().epochs; ++e) {
    train_epoch(model, data, state);
    if (on_epoch) on_epoch(model, state);
  }
  return state;
}

void write_history_csv(std::ostream& os, std::span<const EpochRecord> history) {
  os << "epoch,l_seg,l_dice,l_bd,l_sd,l_cl,frozen\n";
  char buf[256];
  for (const EpochRecord& r : history) {
    std::snprintf(buf, sizeof buf, "%d,%.17g,%.17g,%.17g,%.17g,%.17g,%d\n", r.epoch, r.l_seg, r.l_dice, r.l_bd, r.l_sd,
                  r.l_cl, r.frozen ? 1 : 0);
    os << buf;
  }
}

std::vector<Prediction> predict(BsdaModel& model, std::span<const Sample* const> samples, int batch_size) {
  if (batch_size < 1) throw Error(Errc::ConfigInvalid, "batch_size must be >= 1");
  std::vector<Prediction> out;
  for (std::size_t begin = 0; begin < samples.size(); begin += static_cast<std::size_t>(batch_size)) {
    const std::size_t end = std::min(samples.size(), begin + static_cast<std::size_t>(batch_size));
    Graph g;
    Var x = g.constant(image_batch(samples, begin, end));
    SegOutputs seg = forward_segmentor(g, model, x, Mode::Eval);
    std::optional<Tensor> logits;
    if (model.classifier) logits = fuse_and_classify(g, model, x, seg, Mode::Eval).value();
    const Tensor& p = seg.seg_logits.value();
    const int h = p.dim(2);
    const int w = p.dim(3);
    for (std::size_t i = begin; i < end; ++i) {
      const int n = static_cast<int>(i - begin);
      std::vector<std::uint8_t> cells(static_cast<std::size_t>(h) * w);
      const double* src = p.data() + static_cast<std::size_t>(n) * cells.size();
      // sigmoid(z) >= 0.5 exactly when z >= 0.
      for (std::size_t k = 0; k < cells.size(); ++k) cells[k] = src[k] >= 0.0 ? 1 : 0;
      Prediction pred{samples[i]->id, BinaryMask(h, w, std::move(cells)), std::nullopt};
      if (logits) pred.label = argmax_row(*logits, n);
      out.push_back(std::move(pred));
    }
  }
  return out;
}

std::vector<Prediction> oracle_predictions(std::span<const Sample* const> samples) {
  std::vector<Prediction> out;
  for (const Sample* s : samples) out.push_back({s->id, s->mask, s->label});
  return out;
}

Evaluation evaluate(std::span<const Prediction> predictions, std::span<const Sample* const> samples, int classes) {
  if (predictions.size() != samples.size()) {
    throw Error(Errc::DimMismatch, std::to_string(predictions.size()) + " predictions for " +
                                       std::to_string(samples.size()) + " samples");
  }
  Evaluation ev;
  bool labelled = !predictions.empty();
  for (const Prediction& p : predictions) labelled = labelled && p.label.has_value();
  if (labelled) ev.confusion.emplace(classes);
  for (std::size_t i = 0; i < samples.size(); ++i) {
    ev.scores.push_back(score_sample(samples[i]->id, predictions[i].mask, samples[i]->mask));
    if (labelled) ev.confusion->add(samples[i]->label, *predictions[i].label);
  }
  ev.segmentation = summarize(ev.scores);
  if (ev.confusion && ev.confusion->total() > 0) ev.classification = classification_report(*ev.confusion);
  return ev;
}

}  // namespace bsda
