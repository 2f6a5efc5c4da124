// SPDX-License-Identifier: Apache-2.0
#include "qat/autodiff/graph.hpp"

#include "qat/error.hpp"

namespace qat::ad {

template <class Real>
const Tensor<Real>& Var<Real>::value() const {
  return graph_->value_of(id_);
}

template <class Real>
bool Var<Real>::requires_grad() const {
  return graph_->requires_grad_of(id_);
}

template <class Real>
Var<Real> Graph<Real>::constant(Tensor<Real> value) {
  if (!value.all_finite()) throw NonFiniteError("constant: non-finite input value");
  Node n;
  n.op = "constant";
  n.value = std::move(value);
  n.is_leaf = true;
  nodes_.push_back(std::move(n));
  return Var<Real>(this, nodes_.size() - 1);
}

template <class Real>
Var<Real> Graph<Real>::parameter(Parameter<Real>& p) {
  if (!p.value.all_finite()) throw NonFiniteError("parameter '" + p.name + "' is not finite");
  Node n;
  n.op = "parameter";
  n.value = p.value;
  n.requires_grad = true;
  n.is_leaf = true;
  n.param = &p;
  nodes_.push_back(std::move(n));
  return Var<Real>(this, nodes_.size() - 1);
}

template <class Real>
Var<Real> Graph<Real>::input(Tensor<Real> value, bool requires_grad) {
  if (!value.all_finite()) throw NonFiniteError("input: non-finite value");
  Node n;
  n.op = "input";
  n.value = std::move(value);
  n.requires_grad = requires_grad;
  n.is_leaf = true;
  nodes_.push_back(std::move(n));
  return Var<Real>(this, nodes_.size() - 1);
}

template <class Real>
Var<Real> Graph<Real>::record(std::string op, std::vector<Var<Real>> inputs, Tensor<Real> value,
                              BackwardFn<Real> backward) {
  if (differentiated_) {
    throw GraphError(op + ": cannot record onto a graph that was already differentiated");
  }
  if (!value.all_finite()) throw NonFiniteError(op + ": forward produced NaN/Inf");
  Node n;
  n.op = std::move(op);
  for (const auto& v : inputs) {
    if (&v.graph() != this) throw GraphError(n.op + ": input belongs to another graph");
    n.inputs.push_back(v.id());
    n.requires_grad = n.requires_grad || nodes_[v.id()].requires_grad;
  }
  n.value = std::move(value);
  if (n.requires_grad) n.backward = std::move(backward);
  nodes_.push_back(std::move(n));
  return Var<Real>(this, nodes_.size() - 1);
}

template <class Real>
void Graph<Real>::backward(Var<Real> loss) {
  if (&loss.graph() != this) throw GraphError("backward: loss belongs to another graph");
  if (differentiated_) {
    throw GraphError("backward: stale graph, backward already ran for this forward pass");
  }
  Node& root = nodes_.at(loss.id());
  if (root.value.size() != 1) {
    throw GraphError("backward: loss must be scalar, got shape " + to_string(root.value.shape()));
  }
  differentiated_ = true;
  if (!root.requires_grad) return;
  root.grad = Tensor<Real>(root.value.shape(), Real(1));

  std::vector<const Tensor<Real>*> in;
  std::vector<Tensor<Real>*> grad_in;
  for (std::size_t i = loss.id() + 1; i-- > 0;) {
    Node& n = nodes_[i];
    if (n.is_leaf || !n.requires_grad || n.grad.empty()) continue;
    in.clear();
    grad_in.clear();
    for (std::size_t id : n.inputs) {
      Node& src = nodes_[id];
      in.push_back(&src.value);
      if (src.requires_grad) {
        if (src.grad.empty()) src.grad = Tensor<Real>(src.value.shape());
        grad_in.push_back(&src.grad);
      } else {
        grad_in.push_back(nullptr);
      }
    }
    n.backward(BackwardArgs<Real>{n.grad, n.value, in, grad_in});
    for (auto* g : grad_in) {
      if (g && !g->all_finite()) throw NonFiniteError(n.op + ": backward produced NaN/Inf");
    }
    n.grad = Tensor<Real>();
  }

  for (auto& n : nodes_) {
    if (!n.param) continue;
    auto dst = n.param->grad.data();
    if (!n.grad.empty()) {
      auto src = n.grad.data();
      for (std::size_t k = 0; k < dst.size(); ++k) dst[k] += src[k];
    }
    n.param->grad_ready = true;
  }
}

template <class Real>
const Tensor<Real>& Graph<Real>::grad(Var<Real> v) const {
  const Node& n = nodes_.at(v.id());
  if (!differentiated_) throw GraphError("grad: backward has not run");
  if (!n.is_leaf) throw GraphError("grad: only leaf gradients are retained");
  if (n.grad.empty()) throw GraphError("grad: node received no gradient");
  return n.grad;
}

template <class Real>
void Graph<Real>::reset() {
  nodes_.clear();
  differentiated_ = false;
}

template class Var<float>;
template class Var<double>;
template class Graph<float>;
template class Graph<double>;

}  // namespace qat::ad
