#include "bsda/graph.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "bsda/error.hpp"

namespace bsda::ad {

std::size_t numel(const Shape& shape) {
  std::size_t n = 1;
  for (int d : shape) {
    if (d < 0) throw Error(Errc::ShapeMismatch, "negative extent in shape " + to_string(shape));
    n *= static_cast<std::size_t>(d);
  }
  return n;
}

std::string to_string(const Shape& shape) {
  std::string out = "(";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) out += ", ";
    out += std::to_string(shape[i]);
  }
  return out + ")";
}

Tensor::Tensor(Shape shape, double fill) : shape_(std::move(shape)), data_(numel(shape_), fill) {}

Tensor::Tensor(Shape shape, std::vector<double> data) : shape_(std::move(shape)), data_(std::move(data)) {
  if (data_.size() != numel(shape_)) {
    throw Error(Errc::ShapeMismatch, "data length " + std::to_string(data_.size()) +
                                         " does not match shape " + to_string(shape_));
  }
}

void Tensor::fill(double value) { std::fill(data_.begin(), data_.end(), value); }

bool Tensor::all_finite() const noexcept {
  return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
}

void Parameter::zero_grad() {
  if (grad.size() != value.size() || grad.shape() != value.shape()) {
    grad = Tensor(value.shape());
  } else {
    grad.fill(0.0);
  }
}

const Tensor& Var::value() const { return graph->value(*this); }

Graph::Graph() {
#ifdef NDEBUG
  check_finite_ = false;
#else
  check_finite_ = true;
#endif
}

Graph::Node& Graph::node(Var v) {
  if (v.graph != this || v.id < 0 || static_cast<std::size_t>(v.id) >= nodes_.size()) {
    throw Error(Errc::ShapeMismatch, "variable does not belong to this graph");
  }
  return nodes_[static_cast<std::size_t>(v.id)];
}

const Graph::Node& Graph::node(Var v) const { return const_cast<Graph*>(this)->node(v); }

Var Graph::push(Node n) {
  if (check_finite_ && !n.value.all_finite()) {
    throw Error(Errc::NonFinite, "non-finite value produced by " + std::string(n.op));
  }
  nodes_.push_back(std::move(n));
  return Var{this, static_cast<int>(nodes_.size()) - 1};
}

Var Graph::constant(Tensor value) {
  Node n;
  n.op = "constant";
  n.value = std::move(value);
  n.is_leaf = true;
  return push(std::move(n));
}

Var Graph::input(Tensor value) {
  Node n;
  n.op = "input";
  n.value = std::move(value);
  n.requires_grad = true;
  n.is_leaf = true;
  return push(std::move(n));
}

Var Graph::parameter(Parameter& p) {
  for (const auto& [param, id] : param_nodes_) {
    if (param == &p) return Var{this, id};
  }
  Node n;
  n.op = "parameter";
  n.value = p.value;
  n.requires_grad = true;
  n.is_leaf = true;
  n.param = &p;
  Var v = push(std::move(n));
  param_nodes_.emplace_back(&p, v.id);
  return v;
}

Var Graph::record(std::string_view op, Tensor value, std::initializer_list<Var> inputs,
                  BackwardFn backward) {
  return record(op, std::move(value), std::span<const Var>(inputs.begin(), inputs.size()),
                std::move(backward));
}

Var Graph::record(std::string_view op, Tensor value, std::span<const Var> inputs, BackwardFn backward) {
  Node n;
  n.op = op;
  n.value = std::move(value);
  for (const Var& in : inputs) n.requires_grad = n.requires_grad || node(in).requires_grad;
  if (n.requires_grad) n.backward = std::move(backward);
  return push(std::move(n));
}

const Tensor& Graph::value(Var v) const { return node(v).value; }

bool Graph::requires_grad(Var v) const { return node(v).requires_grad; }

std::string_view Graph::op(Var v) const { return node(v).op; }

Tensor& Graph::grad_buffer(Var v) {
  Node& n = node(v);
  if (n.grad.size() != n.value.size() || n.grad.shape() != n.value.shape()) {
    n.grad = Tensor(n.value.shape());
  }
  return n.grad;
}

const Tensor* Graph::grad(Var v) const {
  const Node& n = node(v);
  return n.grad.size() > 0 ? &n.grad : nullptr;
}

void Graph::backward(Var root) {
  Node& r = node(root);
  if (r.value.size() != 1) {
    throw Error(Errc::ShapeMismatch, "backward root must be a scalar, got " + to_string(r.value.shape()));
  }
  grad_buffer(root)[0] += 1.0;
  for (int i = root.id; i >= 0; --i) {
    Node& n = nodes_[static_cast<std::size_t>(i)];
    if (n.is_leaf || !n.backward || n.grad.size() == 0) continue;
    if (hook_) hook_(n.op, n.grad);
    n.backward(*this, n.grad);
    // Interior gradients are not needed once propagated.
    n.grad = Tensor();
  }
  for (const auto& [param, id] : param_nodes_) {
    const Node& n = nodes_[static_cast<std::size_t>(id)];
    if (n.grad.size() == 0) continue;
    if (param->grad.size() != param->value.size()) param->grad = Tensor(param->value.shape());
    auto dst = param->grad.values();
    auto src = n.grad.values();
    for (std::size_t k = 0; k < dst.size(); ++k) dst[k] += src[k];
  }
}

}  // namespace bsda::ad
