#include "bsda/optim.hpp"

#include <cmath>

#include "bsda/error.hpp"

namespace bsda::ad {

void adam_step(std::span<Parameter* const> params, AdamState& state) {
  if (state.first_moment.empty() && state.second_moment.empty()) {
    for (const Parameter* p : params) {
      state.first_moment.emplace_back(p->value.shape());
      state.second_moment.emplace_back(p->value.shape());
    }
  }
  if (state.first_moment.size() != params.size() || state.second_moment.size() != params.size()) {
    throw Error(Errc::ShapeMismatch, "adam state tracks " + std::to_string(state.first_moment.size()) +
                                         " parameters, got " + std::to_string(params.size()));
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    const Parameter& p = *params[i];
    if (state.first_moment[i].shape() != p.value.shape() || state.second_moment[i].shape() != p.value.shape() ||
        (p.grad.size() != 0 && p.grad.shape() != p.value.shape())) {
      throw Error(Errc::ShapeMismatch, "adam moment shape mismatch for " + p.name);
    }
  }

  ++state.step;
  const auto& o = state.options;
  const double t = static_cast<double>(state.step);
  const double correction1 = 1.0 - std::pow(o.beta1, t);
  const double correction2 = 1.0 - std::pow(o.beta2, t);
  for (std::size_t i = 0; i < params.size(); ++i) {
    Parameter& p = *params[i];
    auto value = p.value.values();
    auto m = state.first_moment[i].values();
    auto v = state.second_moment[i].values();
    const bool has_grad = p.grad.size() != 0;
    for (std::size_t k = 0; k < value.size(); ++k) {
      const double g = has_grad ? p.grad[k] : 0.0;
      m[k] = o.beta1 * m[k] + (1.0 - o.beta1) * g;
      v[k] = o.beta2 * v[k] + (1.0 - o.beta2) * g * g;
      const double m_hat = m[k] / correction1;
      const double v_hat = v[k] / correction2;
      value[k] -= o.lr * m_hat / (std::sqrt(v_hat) + o.eps);
    }
  }
}

}  // namespace bsda::ad
