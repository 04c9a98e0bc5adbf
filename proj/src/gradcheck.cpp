#include "bsda/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <ostream>
#include <random>

#include "bsda/error.hpp"
#include "bsda/model.hpp"
#include "bsda/ops.hpp"

namespace bsda {

using ad::Graph;
using ad::Shape;
using ad::Tensor;
using ad::Var;

namespace {

using Rng = std::mt19937_64;

Tensor uniform(Shape shape, Rng& rng, double lo = -1.0, double hi = 1.0) {
  std::uniform_real_distribution<double> d(lo, hi);
  Tensor t(std::move(shape));
  for (double& v : t.values()) v = d(rng);
  return t;
}

// Values bounded away from zero so relu's kink is never straddled.
Tensor away_from_zero(Shape shape, Rng& rng) {
  std::uniform_real_distribution<double> mag(0.1, 1.0);
  std::bernoulli_distribution sign(0.5);
  Tensor t(std::move(shape));
  for (double& v : t.values()) v = sign(rng) ? mag(rng) : -mag(rng);
  return t;
}

// Distinct values at least 0.01 apart in random order, so max pooling has no
// near-ties within a finite-difference step.
Tensor distinct(Shape shape, Rng& rng) {
  Tensor t(std::move(shape));
  std::vector<double> v(t.size());
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = -1.0 + 0.01 * static_cast<double>(i);
  std::shuffle(v.begin(), v.end(), rng);
  std::copy(v.begin(), v.end(), t.data());
  return t;
}

Tensor binary(Shape shape, Rng& rng) {
  std::bernoulli_distribution b(0.5);
  Tensor t(std::move(shape));
  for (double& v : t.values()) v = b(rng) ? 1.0 : 0.0;
  return t;
}

double sum_squares(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return s;
}

double relative_error(const std::vector<double>& analytic, const std::vector<double>& numeric) {
  std::vector<double> diff(analytic.size());
  for (std::size_t i = 0; i < diff.size(); ++i) diff[i] = analytic[i] - numeric[i];
  const double denom = std::max({std::sqrt(sum_squares(analytic)), std::sqrt(sum_squares(numeric)), 1e-10});
  return std::sqrt(sum_squares(diff)) / denom;
}

std::vector<std::size_t> pick_coordinates(std::size_t size, int max_coordinates, Rng& rng) {
  std::vector<std::size_t> idx(size);
  for (std::size_t i = 0; i < size; ++i) idx[i] = i;
  if (max_coordinates > 0 && size > static_cast<std::size_t>(max_coordinates)) {
    std::shuffle(idx.begin(), idx.end(), rng);
    idx.resize(static_cast<std::size_t>(max_coordinates));
    std::sort(idx.begin(), idx.end());
  }
  return idx;
}

// A case draws its inputs and returns the scalar function to check.
struct Instance {
  GraphFunction f;
  std::vector<Tensor> inputs;
};

using Builder = std::function<Instance(Rng&)>;

// Reduces an op output to a scalar with fixed random weights.
GraphFunction reduce(std::function<Var(Graph&, std::span<const Var>)> op, Tensor weights) {
  return [op = std::move(op), weights = std::move(weights)](Graph& g, std::span<const Var> in) {
    return ad::weighted_sum(op(g, in), weights);
  };
}

Instance conv_instance(Rng& rng, int n, int c, int h, int o, int k, ad::Conv2dSpec spec, bool bias) {
  const int oh = (h + 2 * spec.padding - k) / spec.stride + 1;
  std::vector<Tensor> inputs{uniform({n, c, h, h}, rng), uniform({o, c, k, k}, rng)};
  if (bias) inputs.push_back(uniform({o}, rng));
  return {reduce(
              [spec, bias](Graph&, std::span<const Var> in) {
                return ad::conv2d(in[0], in[1], bias ? std::optional<Var>(in[2]) : std::nullopt, spec);
              },
              uniform({n, o, oh, oh}, rng)),
          std::move(inputs)};
}

const std::vector<std::pair<GradcheckCase, Builder>>& registry() {
  static const std::vector<std::pair<GradcheckCase, Builder>> cases = {
      {{"conv2d_3x3_pad1", 1e-4}, [](Rng& r) { return conv_instance(r, 2, 3, 5, 4, 3, {1, 1}, true); }},
      {{"conv2d_3x3_stride2", 1e-4}, [](Rng& r) { return conv_instance(r, 2, 2, 7, 3, 3, {2, 0}, false); }},
      {{"conv2d_1x1", 1e-4}, [](Rng& r) { return conv_instance(r, 2, 4, 3, 3, 1, {1, 0}, true); }},
      {{"batchnorm2d_train", 1e-3},
       [](Rng& r) {
         Tensor gamma = uniform({3}, r, 0.5, 1.5);
         return Instance{reduce(
                             [](Graph&, std::span<const Var> in) {
                               ad::BatchNormStats stats(3);
                               return ad::batchnorm2d(in[0], in[1], in[2], stats, ad::Mode::Train);
                             },
                             uniform({3, 3, 4, 4}, r)),
                         {uniform({3, 3, 4, 4}, r, -2.0, 2.0), gamma, uniform({3}, r)}};
       }},
      {{"batchnorm2d_eval", 1e-3},
       [](Rng& r) {
         ad::BatchNormStats stats(3);
         stats.running_mean = uniform({3}, r);
         stats.running_var = uniform({3}, r, 0.5, 2.0);
         return Instance{reduce(
                             [stats](Graph&, std::span<const Var> in) {
                               ad::BatchNormStats s = stats;
                               return ad::batchnorm2d(in[0], in[1], in[2], s, ad::Mode::Eval);
                             },
                             uniform({2, 3, 3, 3}, r)),
                         {uniform({2, 3, 3, 3}, r), uniform({3}, r, 0.5, 1.5), uniform({3}, r)}};
       }},
      {{"relu", 1e-4},
       [](Rng& r) {
         return Instance{reduce([](Graph&, std::span<const Var> in) { return ad::relu(in[0]); }, uniform({2, 3, 4}, r)),
                         {away_from_zero({2, 3, 4}, r)}};
       }},
      {{"sigmoid", 1e-4},
       [](Rng& r) {
         return Instance{reduce([](Graph&, std::span<const Var> in) { return ad::sigmoid(in[0]); }, uniform({2, 3, 4}, r)),
                         {uniform({2, 3, 4}, r, -4.0, 4.0)}};
       }},
      {{"softmax", 1e-4},
       [](Rng& r) {
         return Instance{reduce([](Graph&, std::span<const Var> in) { return ad::softmax(in[0]); }, uniform({4, 5}, r)),
                         {uniform({4, 5}, r, -3.0, 3.0)}};
       }},
      {{"upsample_nearest2x", 1e-4},
       [](Rng& r) {
         return Instance{
             reduce([](Graph&, std::span<const Var> in) { return ad::upsample_nearest2x(in[0]); }, uniform({2, 2, 6, 6}, r)),
             {uniform({2, 2, 3, 3}, r)}};
       }},
      {{"maxpool2x", 1e-4},
       [](Rng& r) {
         return Instance{reduce([](Graph&, std::span<const Var> in) { return ad::maxpool2x(in[0]); }, uniform({2, 2, 2, 3}, r)),
                         {distinct({2, 2, 4, 6}, r)}};
       }},
      {{"concat", 1e-6},
       [](Rng& r) {
         return Instance{reduce([](Graph&, std::span<const Var> in) { return ad::concat(in); }, uniform({2, 6, 3, 3}, r)),
                         {uniform({2, 1, 3, 3}, r), uniform({2, 2, 3, 3}, r), uniform({2, 3, 3, 3}, r)}};
       }},
      {{"global_avg_pool", 1e-4},
       [](Rng& r) {
         return Instance{reduce([](Graph&, std::span<const Var> in) { return ad::global_avg_pool(in[0]); }, uniform({2, 3}, r)),
                         {uniform({2, 3, 4, 5}, r)}};
       }},
      {{"linear", 1e-4},
       [](Rng& r) {
         return Instance{
             reduce([](Graph&, std::span<const Var> in) { return ad::linear(in[0], in[1], in[2]); }, uniform({3, 4}, r)),
             {uniform({3, 5}, r), uniform({4, 5}, r), uniform({4}, r)}};
       }},
      {{"add", 1e-4},
       [](Rng& r) {
         return Instance{reduce([](Graph&, std::span<const Var> in) { return ad::add(in[0], in[1]); }, uniform({3, 4}, r)),
                         {uniform({3, 4}, r), uniform({3, 4}, r)}};
       }},
      {{"scale", 1e-4},
       [](Rng& r) {
         return Instance{reduce([](Graph&, std::span<const Var> in) { return ad::scale(in[0], -2.5); }, uniform({3, 4}, r)),
                         {uniform({3, 4}, r)}};
       }},
      {{"weighted_sum", 1e-4},
       [](Rng& r) {
         Tensor w = uniform({2, 5}, r);
         return Instance{[w](Graph&, std::span<const Var> in) { return ad::weighted_sum(in[0], w); }, {uniform({2, 5}, r)}};
       }},
      {{"dice_loss", 1e-4},
       [](Rng& r) {
         Tensor target = binary({2, 1, 5, 5}, r);
         return Instance{[target](Graph&, std::span<const Var> in) { return ad::dice_loss(in[0], target); },
                         {uniform({2, 1, 5, 5}, r, -3.0, 3.0)}};
       }},
      {{"mse_loss", 1e-4},
       [](Rng& r) {
         Tensor target = uniform({2, 1, 4, 4}, r);
         return Instance{[target](Graph&, std::span<const Var> in) { return ad::mse_loss(in[0], target); },
                         {uniform({2, 1, 4, 4}, r)}};
       }},
      {{"cross_entropy", 1e-4},
       [](Rng& r) {
         std::vector<int> labels(4);
         for (int& l : labels) l = std::uniform_int_distribution<int>(0, 2)(r);
         return Instance{[labels](Graph&, std::span<const Var> in) { return ad::cross_entropy(in[0], labels); },
                         {uniform({4, 3}, r, -3.0, 3.0)}};
       }},
      {{"segmentation_objective", 1e-4},
       [](Rng& r) {
         SegTargets targets{binary({2, 1, 6, 6}, r), uniform({2, 1, 6, 6}, r, 0.0, 1.0), uniform({2, 1, 6, 6}, r)};
         return Instance{[targets](Graph&, std::span<const Var> in) {
                           SegOutputs out;
                           out.seg_logits = in[0];
                           out.boundary = in[1];
                           out.distance = in[2];
                           return seg_loss(out, targets, 3.0, 1.0, 1.0).total;
                         },
                         {uniform({2, 1, 6, 6}, r, -3.0, 3.0), uniform({2, 1, 6, 6}, r), uniform({2, 1, 6, 6}, r)}};
       }},
  };
  return cases;
}

constexpr const char* kModelCase = "model_joint_loss";

BsdaConfig tiny_config() {
  BsdaConfig c;
  c.image_size = 16;
  c.encoder_widths = {2, 4, 4, 4};
  c.decoder_width = 8;
  c.epochs = 2;
  c.tau = 0;
  c.batch_size = 3;
  return c;
}

// Total joint loss of a tiny model, parameters perturbed in place.
double model_gradient_error(std::uint64_t seed, const GradcheckOptions& options) {
  const BsdaConfig cfg = tiny_config();
  BsdaModel model(cfg, seed);
  Rng rng(seed ^ 0x9e3779b97f4a7c15ULL);
  const int n = cfg.batch_size;
  const int s = cfg.image_size;
  const Tensor images = uniform({n, 1, s, s}, rng, 0.0, 1.0);
  const SegTargets targets{binary({n, 1, s, s}, rng), uniform({n, 1, s, s}, rng, 0.0, 1.0), uniform({n, 1, s, s}, rng)};
  std::vector<int> labels(static_cast<std::size_t>(n));
  for (int& l : labels) l = std::uniform_int_distribution<int>(0, cfg.classes - 1)(rng);

  std::vector<ad::Parameter*> params = model.segmentor_parameters();
  for (ad::Parameter* p : model.classifier_parameters()) params.push_back(p);

  const auto loss = [&](const ad::Graph::BackwardHook* hook, bool backward) {
    Graph g;
    g.set_check_finite(true);
    if (hook && *hook) g.set_backward_hook(*hook);
    Var x = g.constant(images);
    SegOutputs out = forward_segmentor(g, model, x, ad::Mode::Train);
    Var total = seg_loss(out, targets, cfg.lambda_dice, cfg.lambda_boundary, cfg.lambda_distance).total;
    Var ce = ad::cross_entropy(fuse_and_classify(g, model, x, out, ad::Mode::Train), labels);
    total = ad::add(total, ad::scale(ce, cfg.lambda_cls));
    if (backward) g.backward(total);
    return total.value()[0];
  };

  for (ad::Parameter* p : params) p->zero_grad();
  loss(&options.hook, true);

  // Flattened coordinate space over all parameters.
  std::vector<std::pair<ad::Parameter*, std::size_t>> coords;
  for (ad::Parameter* p : params) {
    for (std::size_t k = 0; k < p->value.size(); ++k) coords.emplace_back(p, k);
  }
  std::vector<double> analytic;
  std::vector<double> numeric;
  for (std::size_t i : pick_coordinates(coords.size(), options.max_coordinates, rng)) {
    auto [p, k] = coords[i];
    const double saved = p->value[k];
    p->value[k] = saved + options.step;
    const double up = loss(nullptr, false);
    p->value[k] = saved - options.step;
    const double down = loss(nullptr, false);
    p->value[k] = saved;
    numeric.push_back((up - down) / (2.0 * options.step));
    analytic.push_back(p->grad.size() ? p->grad[k] : 0.0);
  }
  return relative_error(analytic, numeric);
}

ad::Graph::BackwardHook corrupting_hook(const std::string& op) {
  if (op.empty()) return {};
  return [op](std::string_view name, Tensor& grad_out) {
    if (name == op) {
      for (double& v : grad_out.values()) v *= 1.5;
    }
  };
}

}  // namespace

double gradient_error(const GraphFunction& f, std::vector<Tensor> inputs, const GradcheckOptions& options) {
  Graph g;
  g.set_check_finite(true);
  if (options.hook) g.set_backward_hook(options.hook);
  std::vector<Var> leaves;
  for (const Tensor& t : inputs) leaves.push_back(g.input(t));
  Var out = f(g, leaves);
  if (out.value().size() != 1) throw Error(Errc::ShapeMismatch, "gradient check needs a scalar function");
  g.backward(out);

  const auto evaluate = [&](const std::vector<Tensor>& values) {
    Graph h;
    std::vector<Var> in;
    for (const Tensor& t : values) in.push_back(h.constant(t));
    return f(h, in).value()[0];
  };

  Rng rng(options.seed);
  std::vector<double> analytic;
  std::vector<double> numeric;
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    const Tensor* grad = g.grad(leaves[i]);
    for (std::size_t k : pick_coordinates(inputs[i].size(), options.max_coordinates, rng)) {
      const double saved = inputs[i][k];
      inputs[i][k] = saved + options.step;
      const double up = evaluate(inputs);
      inputs[i][k] = saved - options.step;
      const double down = evaluate(inputs);
      inputs[i][k] = saved;
      numeric.push_back((up - down) / (2.0 * options.step));
      analytic.push_back(grad ? (*grad)[k] : 0.0);
    }
  }
  return relative_error(analytic, numeric);
}

std::vector<GradcheckCase> gradcheck_cases() {
  std::vector<GradcheckCase> out;
  for (const auto& [c, builder] : registry()) out.push_back(c);
  out.push_back({kModelCase, 1e-3});
  return out;
}

GradcheckResult run_gradcheck_case(const std::string& name, const GradcheckSuiteOptions& options) {
  if (options.seeds < 1) throw Error(Errc::ConfigInvalid, "gradcheck needs at least one seed");
  GradcheckOptions check;
  check.hook = corrupting_hook(options.corrupt_op);
  GradcheckResult result{name, 0.0, 0.0, options.seeds, false};
  if (name == kModelCase) {
    result.tolerance = 1e-3;
    check.max_coordinates = 120;
    for (int s = 0; s < options.seeds; ++s) {
      check.seed = options.seed * 1000003ULL + static_cast<std::uint64_t>(s);
      result.max_error = std::max(result.max_error, model_gradient_error(check.seed, check));
    }
  } else {
    const auto it = std::find_if(registry().begin(), registry().end(),
                                 [&](const auto& entry) { return entry.first.name == name; });
    if (it == registry().end()) throw Error(Errc::ConfigInvalid, "unknown gradcheck case '" + name + "'");
    result.tolerance = it->first.tolerance;
    for (int s = 0; s < options.seeds; ++s) {
      check.seed = options.seed * 1000003ULL + static_cast<std::uint64_t>(s);
      Rng rng(check.seed);
      Instance inst = it->second(rng);
      result.max_error = std::max(result.max_error, gradient_error(inst.f, std::move(inst.inputs), check));
    }
  }
  result.passed = result.max_error < result.tolerance;
  return result;
}

std::vector<GradcheckResult> run_gradcheck_suite(const GradcheckSuiteOptions& options) {
  std::vector<GradcheckResult> out;
  for (const GradcheckCase& c : gradcheck_cases()) out.push_back(run_gradcheck_case(c.name, options));
  return out;
}

void print_gradcheck_table(std::ostream& os, std::span<const GradcheckResult> results) {
  char line[160];
  std::snprintf(line, sizeof line, "%-24s %14s %10s %6s  %s\n", "op", "max_rel_error", "tolerance", "seeds", "status");
  os << line;
  for (const GradcheckResult& r : results) {
    std::snprintf(line, sizeof line, "%-24s %14.3e %10.0e %6d  %s\n", r.name.c_str(), r.max_error, r.tolerance, r.seeds,
                  r.passed ? "PASS" : "FAIL");
    os << line;
  }
}

}  // namespace bsda
