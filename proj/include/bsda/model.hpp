#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "bsda/graph.hpp"
#include "bsda/ops.hpp"

namespace bsda {

/// Components that can be switched off to build the ablation variants.
struct Ablation {
  bool boundary_branch = true;
  bool distance_branch = true;
  bool classifier = true;
  /// When false the classifier sees zero tensors in place of decoder features.
  bool fusion = true;

  bool operator==(const Ablation&) const = default;
};

struct BsdaConfig {
  int image_size = 64;
  std::array<int, 4> encoder_widths{8, 16, 32, 64};
  /// Width of the first decoder stage; halved after every upsampling.
  int decoder_width = 32;
  int classes = 3;

  double lambda_cls = 1.0;
  double lambda_dice = 3.0;
  double lambda_boundary = 1.0;
  double lambda_distance = 1.0;
  double sigma = 2.0;
  double heat_floor = 0.001;

  /// Last epoch (1-based) during which the classifier stays frozen.
  int tau = 20;
  int epochs = 200;
  double lr_seg = 1e-4;
  double lr_cls = 2e-5;
  int batch_size = 8;
  std::uint64_t seed = 0;
  bool augment = true;
  Ablation ablation;

  /// Throws ConfigInvalid.
  void validate() const;
  std::array<int, 4> decoder_widths() const;

  bool operator==(const BsdaConfig&) const = default;
};

struct ConvBnRelu {
  ad::Parameter weight;
  ad::Parameter gamma;
  ad::Parameter beta;
  ad::BatchNormStats stats;
  ad::Conv2dSpec spec;
};

struct DoubleConv {
  ConvBnRelu first;
  ConvBnRelu second;
};

struct Encoder {
  ConvBnRelu stem;
  std::array<DoubleConv, 4> stages;
};

struct Decoder {
  std::array<DoubleConv, 4> stages;
  ad::Parameter head_weight;
  ad::Parameter head_bias;
};

struct Classifier {
  ConvBnRelu stem;
  std::array<ConvBnRelu, 4> reducers;
  std::array<DoubleConv, 4> stages;
  ad::Parameter fc_weight;
  ad::Parameter fc_bias;
};

/// Named view of a tensor owned by the model, for checkpoints.
struct NamedTensor {
  std::string name;
  ad::Tensor* tensor;
};

/// Shared encoder, segmentation decoder S, optional boundary (B) and distance
/// (D) decoders, and an optional classifier fed by the decoder features.
class BsdaModel {
 public:
  BsdaModel(const BsdaConfig& config, std::uint64_t seed);

  BsdaModel(const BsdaModel&) = delete;
  BsdaModel& operator=(const BsdaModel&) = delete;
  BsdaModel(BsdaModel&&) = default;
  BsdaModel& operator=(BsdaModel&&) = default;

  const BsdaConfig& config() const noexcept { return config_; }

  Encoder encoder;
  Decoder seg;
  std::optional<Decoder> boundary;
  std::optional<Decoder> distance;
  std::optional<Classifier> classifier;

  /// Encoder and decoders.
  std::vector<ad::Parameter*> segmentor_parameters();
  /// Classifier trunk, fusion reducers and the linear head.
  std::vector<ad::Parameter*> classifier_parameters();
  /// Parameters and batch-norm running statistics, in a fixed order.
  std::vector<NamedTensor> state();

  /// Input channels of S's last decoder stage.
  int seg_final_stage_inputs() const;

 private:
  BsdaConfig config_;
};

/// Decoder stage outputs, coarsest (1/8) first, full resolution last.
using FeaturePyramid = std::array<ad::Var, 4>;

struct SegOutputs {
  ad::Var seg_logits;
  std::optional<ad::Var> boundary;
  std::optional<ad::Var> distance;
  FeaturePyramid seg_features;
  std::optional<FeaturePyramid> boundary_features;
  std::optional<FeaturePyramid> distance_features;
};

/// images: (N, 1, S, S) with S = config.image_size.
SegOutputs forward_segmentor(ad::Graph& g, BsdaModel& model, ad::Var images, ad::Mode mode);

/// Class logits (N, classes). Throws ResolutionMismatch if the pyramid does not
/// line up with the classifier stages.
ad::Var fuse_and_classify(ad::Graph& g, BsdaModel& model, ad::Var images, const SegOutputs& seg,
                          ad::Mode mode);

/// Per-batch targets, each (N, 1, S, S).
struct SegTargets {
  ad::Tensor mask;
  ad::Tensor boundary;
  ad::Tensor distance;
};

struct SegLoss {
  ad::Var total;
  double dice = 0.0;
  double boundary = 0.0;
  double distance = 0.0;
};

/// lambda_dice * dice(sigmoid(p_s), G) + lambda_boundary * mse(p_b, G_bd) +
/// lambda_distance * mse(p_d, G_sd). Terms of absent branches are omitted.
SegLoss seg_loss(const SegOutputs& out, const SegTargets& targets, double lambda_dice,
                 double lambda_boundary, double lambda_distance);

/// FNV-1a over the raw bytes of the given parameters.
std::uint64_t parameter_checksum(std::span<ad::Parameter* const> params);

}  // namespace bsda
