#include "bsda/model.hpp"

#include <cmath>
#include <cstring>
#include <random>
#include <string>

#include "bsda/error.hpp"

namespace bsda {

using ad::Graph;
using ad::Mode;
using ad::Parameter;
using ad::Shape;
using ad::Tensor;
using ad::Var;

void BsdaConfig::validate() const {
  const auto fail = [](const std::string& what) { throw Error(Errc::ConfigInvalid, what); };
  if (image_size < 16 || image_size % 16 != 0) fail("image_size must be a positive multiple of 16");
  for (int w : encoder_widths) {
    if (w < 2 || w % 2 != 0) fail("encoder widths must be even and >= 2");
  }
  if (decoder_width < 8 || decoder_width % 8 != 0) {
    fail("decoder_width must be a multiple of 8 so it halves cleanly over four stages");
  }
  if (classes < 2) fail("classes must be >= 2");
  for (double l : {lambda_cls, lambda_dice, lambda_boundary, lambda_distance}) {
    if (!(l >= 0.0) || !std::isfinite(l)) fail("lambdas must be finite and >= 0");
  }
  if (!(sigma > 0.0)) fail("sigma must be > 0");
  if (!(heat_floor >= 0.0)) fail("heat_floor must be >= 0");
  if (epochs < 1) fail("epochs must be >= 1");
  if (tau < 0 || tau >= epochs) fail("tau must satisfy 0 <= tau < epochs");
  if (!(lr_seg > 0.0) || !(lr_cls > 0.0)) fail("learning rates must be > 0");
  if (batch_size < 2) fail("batch_size must be >= 2 for batch normalisation");
}

std::array<int, 4> BsdaConfig::decoder_widths() const {
  return {decoder_width, decoder_width / 2, decoder_width / 4, decoder_width / 8};
}

namespace {

// Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)), the PyTorch default for conv and
// linear layers.
Parameter uniform_param(std::string name, Shape shape, int fan_in, std::mt19937_64& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
  std::uniform_real_distribution<double> dist(-bound, bound);
  Tensor t(std::move(shape));
  for (double& v : t.values()) v = dist(rng);
  return Parameter{std::move(name), std::move(t), Tensor()};
}

ConvBnRelu make_cbr(const std::string& name, int in, int out, int kernel, std::mt19937_64& rng) {
  ConvBnRelu l{uniform_param(name + ".conv.weight", Shape{out, in, kernel, kernel}, in * kernel * kernel, rng),
               Parameter{name + ".bn.gamma", Tensor(Shape{out}, 1.0), Tensor()},
               Parameter{name + ".bn.beta", Tensor(Shape{out}, 0.0), Tensor()},
               ad::BatchNormStats(out),
               ad::Conv2dSpec{1, kernel / 2}};
  return l;
}

DoubleConv make_double(const std::string& name, int in, int out, std::mt19937_64& rng) {
  ConvBnRelu first = make_cbr(name + ".0", in, out, 3, rng);
  ConvBnRelu second = make_cbr(name + ".1", out, out, 3, rng);
  return DoubleConv{std::move(first), std::move(second)};
}

Decoder make_decoder(const std::string& name, const BsdaConfig& cfg, int extra_last_inputs,
                     std::mt19937_64& rng) {
  const auto enc = cfg.encoder_widths;
  const auto dec = cfg.decoder_widths();
  Decoder d;
  int in = enc[3];
  for (int j = 0; j < 4; ++j) {
    int stage_in = in + enc[3 - j];
    if (j == 3) stage_in += extra_last_inputs;
    d.stages[j] = make_double(name + ".stage" + std::to_string(j), stage_in, dec[j], rng);
    in = dec[j];
  }
  d.head_weight = uniform_param(name + ".head.weight", Shape{1, dec[3], 1, 1}, dec[3], rng);
  d.head_bias = uniform_param(name + ".head.bias", Shape{1}, dec[3], rng);
  return d;
}

void append(std::vector<Parameter*>& out, ConvBnRelu& l) {
  out.push_back(&l.weight);
  out.push_back(&l.gamma);
  out.push_back(&l.beta);
}

void append(std::vector<Parameter*>& out, DoubleConv& d) {
  append(out, d.first);
  append(out, d.second);
}

void append(std::vector<Parameter*>& out, Decoder& d) {
  for (auto& s : d.stages) append(out, s);
  out.push_back(&d.head_weight);
  out.push_back(&d.head_bias);
}

void append_stats(std::vector<NamedTensor>& out, ConvBnRelu& l) {
  const std::string base = l.gamma.name.substr(0, l.gamma.name.size() - std::string(".gamma").size());
  out.push_back({base + ".running_mean", &l.stats.running_mean});
  out.push_back({base + ".running_var", &l.stats.running_var});
}

void append_stats(std::vector<NamedTensor>& out, DoubleConv& d) {
  append_stats(out, d.first);
  append_stats(out, d.second);
}

Var apply(Graph& g, ConvBnRelu& l, Var x, Mode mode) {
  Var y = ad::conv2d(x, g.parameter(l.weight), std::nullopt, l.spec);
  y = ad::batchnorm2d(y, g.parameter(l.gamma), g.parameter(l.beta), l.stats, mode);
  return ad::relu(y);
}

Var apply(Graph& g, DoubleConv& d, Var x, Mode mode) {
  return apply(g, d.second, apply(g, d.first, x, mode), mode);
}

struct DecoderRun {
  Var head;
  FeaturePyramid features;
};

DecoderRun run_decoder(Graph& g, Decoder& d, Var bottleneck, const std::array<Var, 4>& skips,
                       std::optional<Var> last_stage_extra, Mode mode) {
  DecoderRun run;
  Var x = bottleneck;
  for (int j = 0; j < 4; ++j) {
    std::vector<Var> parts{ad::upsample_nearest2x(x), skips[3 - j]};
    if (j == 3 && last_stage_extra) parts.push_back(ad::upsample_nearest2x(*last_stage_extra));
    x = apply(g, d.stages[j], ad::concat(parts), mode);
    run.features[j] = x;
  }
  run.head = ad::conv2d(x, g.parameter(d.head_weight), g.parameter(d.head_bias));
  return run;
}

}  // namespace

BsdaModel::BsdaModel(const BsdaConfig& config, std::uint64_t seed) : config_(config) {
  config_.validate();
  std::mt19937_64 rng(seed);
  const auto enc = config_.encoder_widths;
  const auto dec = config_.decoder_widths();

  encoder.stem = make_cbr("encoder.stem", 1, enc[0], 3, rng);
  int in = enc[0];
  for (int k = 0; k < 4; ++k) {
    encoder.stages[k] = make_double("encoder.stage" + std::to_string(k), in, enc[k], rng);
    in = enc[k];
  }

  const Ablation& ab = config_.ablation;
  const int coupling = ab.boundary_branch ? dec[2] : 0;
  seg = make_decoder("seg", config_, coupling, rng);
  if (ab.boundary_branch) boundary = make_decoder("boundary", config_, 0, rng);
  if (ab.distance_branch) distance = make_decoder("distance", config_, 0, rng);

  if (ab.classifier) {
    Classifier c;
    c.stem = make_cbr("classifier.stem", 1, enc[0], 3, rng);
    const int branches = 1 + (ab.boundary_branch ? 1 : 0) + (ab.distance_branch ? 1 : 0);
    int cin = enc[0];
    for (int k = 0; k < 4; ++k) {
      const int reduced = enc[k] / 2;
      c.reducers[k] = make_cbr("classifier.reduce" + std::to_string(k), branches * dec[3 - k], reduced, 1, rng);
      c.stages[k] = make_double("classifier.stage" + std::to_string(k), cin + reduced, enc[k], rng);
      cin = enc[k];
    }
    c.fc_weight = uniform_param("classifier.fc.weight", Shape{config_.classes, enc[3]}, enc[3], rng);
    c.fc_bias = uniform_param("classifier.fc.bias", Shape{config_.classes}, enc[3], rng);
    classifier = std::move(c);
  }
}

std::vector<Parameter*> BsdaModel::segmentor_parameters() {
  std::vector<Parameter*> out;
  append(out, encoder.stem);
  for (auto& s : encoder.stages) append(out, s);
  append(out, seg);
  if (boundary) append(out, *boundary);
  if (distance) append(out, *distance);
  return out;
}

std::vector<Parameter*> BsdaModel::classifier_parameters() {
  std::vector<Parameter*> out;
  if (!classifier) return out;
  append(out, classifier->stem);
  for (auto& r : classifier->reducers) append(out, r);
  for (auto& s : classifier->stages) append(out, s);
  out.push_back(&classifier->fc_weight);
  out.push_back(&classifier->fc_bias);
  return out;
}

std::vector<NamedTensor> BsdaModel::state() {
  std::vector<NamedTensor> out;
  for (Parameter* p : segmentor_parameters()) out.push_back({p->name, &p->value});
  for (Parameter* p : classifier_parameters()) out.push_back({p->name, &p->value});
  append_stats(out, encoder.stem);
  for (auto& s : encoder.stages) append_stats(out, s);
  for (Decoder* d : {&seg, boundary ? &*boundary : nullptr, distance ? &*distance : nullptr}) {
    if (!d) continue;
    for (auto& s : d->stages) append_stats(out, s);
  }
  if (classifier) {
    append_stats(out, classifier->stem);
    for (auto& r : classifier->reducers) append_stats(out, r);
    for (auto& s : classifier->stages) append_stats(out, s);
  }
  return out;
}

int BsdaModel::seg_final_stage_inputs() const { return seg.stages[3].first.weight.value.dim(1); }

SegOutputs forward_segmentor(Graph& g, BsdaModel& model, Var images, Mode mode) {
  const BsdaConfig& cfg = model.config();
  const auto& shape = images.shape();
  if (shape.size() != 4 || shape[1] != 1 || shape[2] != cfg.image_size || shape[3] != cfg.image_size) {
    throw Error(Errc::ShapeMismatch, "segmentor expects (N, 1, " + std::to_string(cfg.image_size) + ", " +
                                         std::to_string(cfg.image_size) + "), got " + ad::to_string(shape));
  }
  Var x = apply(g, model.encoder.stem, images, mode);
  std::array<Var, 4> skips;
  for (int k = 0; k < 4; ++k) {
    x = apply(g, model.encoder.stages[k], x, mode);
    skips[k] = x;
    x = ad::maxpool2x(x);
  }

  SegOutputs out;
  std::optional<Var> coupling;
  if (model.boundary) {
    DecoderRun b = run_decoder(g, *model.boundary, x, skips, std::nullopt, mode);
    out.boundary = b.head;
    out.boundary_features = b.features;
    coupling = b.features[2];
  }
  if (model.distance) {
    DecoderRun d = run_decoder(g, *model.distance, x, skips, std::nullopt, mode);
    out.distance = d.head;
    out.distance_features = d.features;
  }
  DecoderRun s = run_decoder(g, model.seg, x, skips, coupling, mode);
  out.seg_logits = s.head;
  out.seg_features = s.features;
  return out;
}

Var fuse_and_classify(Graph& g, BsdaModel& model, Var images, const SegOutputs& seg, Mode mode) {
  if (!model.classifier) throw Error(Errc::ConfigInvalid, "model was built without a classifier");
  Classifier& c = *model.classifier;
  const BsdaConfig& cfg = model.config();
  const bool fuse = cfg.ablation.fusion;
  Var x = apply(g, c.stem, images, mode);
  for (int k = 0; k < 4; ++k) {
    const int j = 3 - k;
    const auto& xs = x.shape();
    Var fused;
    if (fuse) {
      std::vector<Var> parts{seg.seg_features[j]};
      if (seg.boundary_features) parts.push_back((*seg.boundary_features)[j]);
      if (seg.distance_features) parts.push_back((*seg.distance_features)[j]);
      for (const Var& p : parts) {
        if (p.shape()[0] != xs[0] || p.shape()[2] != xs[2] || p.shape()[3] != xs[3]) {
          throw Error(Errc::ResolutionMismatch, "decoder feature " + ad::to_string(p.shape()) +
                                                    " does not match classifier stage " + ad::to_string(xs));
        }
      }
      fused = apply(g, c.reducers[k], ad::concat(parts), mode);
    } else {
      fused = g.constant(Tensor(Shape{xs[0], cfg.encoder_widths[k] / 2, xs[2], xs[3]}));
    }
    x = apply(g, c.stages[k], ad::concat({x, fused}), mode);
    x = ad::maxpool2x(x);
  }
  return ad::linear(ad::global_avg_pool(x), g.parameter(c.fc_weight), g.parameter(c.fc_bias));
}

SegLoss seg_loss(const SegOutputs& out, const SegTargets& targets, double lambda_dice,
                 double lambda_boundary, double lambda_distance) {
  SegLoss loss;
  Var dice = ad::dice_loss(out.seg_logits, targets.mask);
  loss.dice = dice.value()[0];
  loss.total = ad::scale(dice, lambda_dice);
  if (out.boundary) {
    Var bd = ad::mse_loss(*out.boundary, targets.boundary);
    loss.boundary = bd.value()[0];
    loss.total = ad::add(loss.total, ad::scale(bd, lambda_boundary));
  }
  if (out.distance) {
    Var sd = ad::mse_loss(*out.distance, targets.distance);
    loss.distance = sd.value()[0];
    loss.total = ad::add(loss.total, ad::scale(sd, lambda_distance));
  }
  return loss;
}

std::uint64_t parameter_checksum(std::span<Parameter* const> params) {
  std::uint64_t h = 1469598103934665603ULL;
  for (const Parameter* p : params) {
    const auto* bytes = reinterpret_cast<const unsigned char*>(p->value.data());
    for (std::size_t i = 0; i < p->value.size() * sizeof(double); ++i) {
      h ^= bytes[i];
      h *= 1099511628211ULL;
    }
  }
  return h;
}

}  // namespace bsda
