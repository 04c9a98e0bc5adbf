#pragma once

#include <deque>
#include <functional>
#include <initializer_list>
#include <string>
#include <string_view>
#include <vector>

#include "bsda/tensor.hpp"

namespace bsda::ad {

/// Trainable tensor that outlives any single graph. Leaves created from it by
/// Graph::parameter accumulate their gradient into `grad` on backward.
struct Parameter {
  std::string name;
  Tensor value;
  Tensor grad;

  void zero_grad();
};

class Graph;

/// Handle to a node of a Graph.
struct Var {
  Graph* graph = nullptr;
  int id = -1;

  const Tensor& value() const;
  const Shape& shape() const { return value().shape(); }
  bool valid() const noexcept { return graph != nullptr && id >= 0; }
};

/// Tape of operations in creation order. Creation order is a topological
/// order, so backward walks the tape in reverse and every node's gradient is
/// complete before its backward function runs.
class Graph {
 public:
  using BackwardFn = std::function<void(Graph&, const Tensor& grad_out)>;
  /// Called with the upstream gradient of every op node before its backward
  /// function; used to inject faults when testing the gradient checker.
  using BackwardHook = std::function<void(std::string_view op, Tensor& grad_out)>;

  Graph();

  Var constant(Tensor value);
  /// Leaf that receives a gradient readable through grad().
  Var input(Tensor value);
  /// One leaf per parameter per graph; repeated calls return the same node.
  Var parameter(Parameter& p);

  Var record(std::string_view op, Tensor value, std::initializer_list<Var> inputs, BackwardFn backward);
  Var record(std::string_view op, Tensor value, std::span<const Var> inputs, BackwardFn backward);

  const Tensor& value(Var v) const;
  bool requires_grad(Var v) const;
  std::string_view op(Var v) const;
  /// Gradient accumulator for v, zero-initialised on first use.
  Tensor& grad_buffer(Var v);
  /// Null until backward has propagated a gradient to v.
  const Tensor* grad(Var v) const;

  /// Seeds d(root)/d(root) = 1; root must hold exactly one element.
  void backward(Var root);

  void set_check_finite(bool enabled) noexcept { check_finite_ = enabled; }
  void set_backward_hook(BackwardHook hook) { hook_ = std::move(hook); }
  std::size_t size() const noexcept { return nodes_.size(); }

 private:
  struct Node {
    std::string_view op;
    Tensor value;
    Tensor grad;
    bool requires_grad = false;
    bool is_leaf = false;
    Parameter* param = nullptr;
    BackwardFn backward;
  };

  Node& node(Var v);
  const Node& node(Var v) const;
  Var push(Node n);

  std::deque<Node> nodes_;  // deque so value() references survive later pushes
  std::vector<std::pair<Parameter*, int>> param_nodes_;
  bool check_finite_;
  BackwardHook hook_;
};

}  // namespace bsda::ad
