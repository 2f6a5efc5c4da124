// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "qat/autodiff/tensor.hpp"

namespace qat::ad {

template <class Real>
class Graph;

/// Handle to a node of a Graph. Cheap to copy; valid while the graph lives.
template <class Real>
class Var {
 public:
  Var() = default;
  Var(Graph<Real>* graph, std::size_t id) : graph_(graph), id_(id) {}

  const Tensor<Real>& value() const;
  const Shape& shape() const { return value().shape(); }
  bool requires_grad() const;

  Graph<Real>& graph() const { return *graph_; }
  std::size_t id() const { return id_; }
  bool valid() const { return graph_ != nullptr; }

 private:
  Graph<Real>* graph_ = nullptr;
  std::size_t id_ = 0;
};

/// What a backward rule sees. `grad_in[i]` is null when input i does not
/// need a gradient; otherwise it is a zero-initialised (or partially
/// accumulated) buffer the rule must add into.
template <class Real>
struct BackwardArgs {
  const Tensor<Real>& grad_out;
  const Tensor<Real>& out;
  std::span<const Tensor<Real>* const> in;
  std::span<Tensor<Real>* const> grad_in;
};

template <class Real>
using BackwardFn = std::function<void(const BackwardArgs<Real>&)>;

/// Tape of recorded operations for one forward pass.
///
/// Nodes are appended in execution order, so every node's inputs precede
/// it. `backward` may run once; a second call without `reset` throws.
template <class Real>
class Graph {
 public:
  Graph() = default;
  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;

  /// Value that never receives a gradient.
  Var<Real> constant(Tensor<Real> value);

  /// Leaf bound to a model parameter; backward accumulates into `p.grad`.
  Var<Real> parameter(Parameter<Real>& p);

  /// Free-standing leaf whose gradient is read back with `grad()`.
  Var<Real> input(Tensor<Real> value, bool requires_grad = true);

  /// Extension point for operations with their own backward rule. The
  /// rule is dropped when no input requires a gradient.
  Var<Real> record(std::string op, std::vector<Var<Real>> inputs, Tensor<Real> value,
                   BackwardFn<Real> backward);

  void backward(Var<Real> loss);

  /// Gradient of the last backward with respect to a leaf.
  const Tensor<Real>& grad(Var<Real> v) const;

  void reset();

  std::size_t size() const { return nodes_.size(); }
  bool differentiated() const { return differentiated_; }
  const std::string& op_name(std::size_t id) const { return nodes_.at(id).op; }
  const std::vector<std::size_t>& inputs_of(std::size_t id) const { return nodes_.at(id).inputs; }
  const Tensor<Real>& value_of(std::size_t id) const { return nodes_.at(id).value; }
  bool requires_grad_of(std::size_t id) const { return nodes_.at(id).requires_grad; }

 private:
  struct Node {
    std::string op;
    std::vector<std::size_t> inputs;
    Tensor<Real> value;
    Tensor<Real> grad;
    bool requires_grad = false;
    bool is_leaf = false;
    BackwardFn<Real> backward;
    Parameter<Real>* param = nullptr;
  };

  std::vector<Node> nodes_;
  bool differentiated_ = false;
};

extern template class Var<float>;
extern template class Var<double>;
extern template class Graph<float>;
extern template class Graph<double>;

}  // namespace qat::ad
