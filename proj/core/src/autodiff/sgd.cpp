// SPDX-License-Identifier: Apache-2.0
#include "qat/autodiff/sgd.hpp"

#include <string>

#include "qat/error.hpp"

namespace qat::ad {

template <class Real>
Sgd<Real>::Sgd(std::vector<Parameter<Real>*> params, SgdConfig config)
    : params_(std::move(params)), config_(config) {
  buffers_.reserve(params_.size());
  for (auto* p : params_) buffers_.emplace_back(p->value.shape());
}

template <class Real>
void Sgd<Real>::step() {
  for (auto* p : params_) {
    if (!p->grad_ready) throw GraphError("sgd_step: parameter '" + p->name + "' has no gradient");
  }
  const Real lr = static_cast<Real>(config_.lr);
  const Real mu = static_cast<Real>(config_.momentum);
  const Real wd = static_cast<Real>(config_.weight_decay);
  for (std::size_t i = 0; i < params_.size(); ++i) {
    auto& p = *params_[i];
    auto w = p.value.data();
    auto g = p.grad.data();
    auto v = buffers_[i].data();
    const bool decay = p.decay && wd != Real(0);
    for (std::size_t k = 0; k < w.size(); ++k) {
      const Real gk = decay ? g[k] + wd * w[k] : g[k];
      v[k] = mu * v[k] + gk;
      const Real update = config_.nesterov ? gk + mu * v[k] : v[k];
      w[k] -= lr * update;
    }
    p.grad_ready = false;
  }
}

template <class Real>
void Sgd<Real>::zero_grad() {
  for (auto* p : params_) p->zero_grad();
}

template <class Real>
void Sgd<Real>::load_momentum_buffers(std::vector<Tensor<Real>> buffers) {
  if (buffers.size() != params_.size()) {
    throw ShapeError("sgd: expected " + std::to_string(params_.size()) + " momentum buffers, got " +
                     std::to_string(buffers.size()));
  }
  for (std::size_t i = 0; i < buffers.size(); ++i) {
    if (buffers[i].shape() != params_[i]->value.shape()) {
      throw ShapeError("sgd: momentum buffer for '" + params_[i]->name + "' has shape " +
                       to_string(buffers[i].shape()));
    }
  }
  buffers_ = std::move(buffers);
}

template class Sgd<float>;
template class Sgd<double>;

}  // namespace qat::ad
