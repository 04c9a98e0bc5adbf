#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "bsda/graph.hpp"

namespace bsda::ad {

struct AdamOptions {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// Moment buffers are created on the first step, one per parameter, in the
/// order the parameters are passed.
struct AdamState {
  AdamOptions options;
  std::int64_t step = 0;
  std::vector<Tensor> first_moment;
  std::vector<Tensor> second_moment;
};

/// Bias-corrected Adam update using each parameter's accumulated gradient.
/// A parameter without a gradient buffer is treated as having zero gradient.
void adam_step(std::span<Parameter* const> params, AdamState& state);

}  // namespace bsda::ad
