#pragma once

#include <optional>
#include <span>

#include "bsda/graph.hpp"

namespace bsda::ad {

enum class Mode { Train, Eval };

struct Conv2dSpec {
  int stride = 1;
  int padding = 0;
};

/// Cross-correlation. x: (N, C, H, W), weight: (O, C, K, K), bias: (O).
Var conv2d(Var x, Var weight, std::optional<Var> bias, Conv2dSpec spec = {});

/// Running statistics and hyper-parameters of one batch-norm layer.
struct BatchNormStats {
  Tensor running_mean;
  Tensor running_var;
  double momentum = 0.1;
  double eps = 1e-5;

  explicit BatchNormStats(int channels = 0)
      : running_mean(Shape{channels}, 0.0), running_var(Shape{channels}, 1.0) {}
};

/// Per-channel normalisation of (N, C, H, W). Train mode uses biased batch
/// statistics and updates `stats` (unbiased variance, PyTorch convention);
/// eval mode uses the running statistics. Train mode needs N >= 2.
Var batchnorm2d(Var x, Var gamma, Var beta, BatchNormStats& stats, Mode mode);

Var relu(Var x);
Var sigmoid(Var x);
/// Row-wise softmax over the last axis of a (N, K) tensor.
Var softmax(Var x);

Var upsample_nearest2x(Var x);
/// 2x2 stride-2 max pooling; ties go to the first element in row-major order.
Var maxpool2x(Var x);
/// Concatenation along the channel axis of (N, C_i, H, W) tensors.
Var concat(std::span<const Var> xs);
Var concat(std::initializer_list<Var> xs);
/// (N, C, H, W) -> (N, C).
Var global_avg_pool(Var x);
/// x: (N, I), weight: (O, I), bias: (O).
Var linear(Var x, Var weight, Var bias);

Var add(Var a, Var b);
Var scale(Var x, double factor);
/// Scalar sum(x * weights); used to project outputs in gradient checks.
Var weighted_sum(Var x, const Tensor& weights);

/// Batch mean of 1 - (2 sum(p g) + eps) / (sum(p) + sum(g) + eps) with
/// p = sigmoid(logits), reduced over all non-batch axes.
Var dice_loss(Var logits, const Tensor& target, double eps = 1.0);
Var mse_loss(Var pred, const Tensor& target);
/// Batch mean of -log softmax(logits)[label]. logits: (N, K).
Var cross_entropy(Var logits, std::span<const int> labels);

}  // namespace bsda::ad
