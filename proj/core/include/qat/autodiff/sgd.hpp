// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <span>
#include <vector>

#include "qat/autodiff/tensor.hpp"

namespace qat::ad {

struct SgdConfig {
  double lr = 0.01;
  double momentum = 0.9;
  double weight_decay = 1e-4;
  bool nesterov = true;
};

/// Momentum SGD with L2 decay folded into the gradient before the
/// momentum update:
///   g' = g + wd * w        (only for parameters with `decay` set)
///   v  = mu * v + g'
///   w -= lr * (g' + mu * v)   (nesterov)  or  lr * v  (classical)
template <class Real>
class Sgd {
 public:
  Sgd(std::vector<Parameter<Real>*> params, SgdConfig config);

  /// Applies one update and marks the gradients consumed. Throws if any
  /// parameter has no gradient from a backward pass.
  void step();
  void zero_grad();

  void set_lr(double lr) { config_.lr = lr; }
  const SgdConfig& config() const { return config_; }

  std::span<const Tensor<Real>> momentum_buffers() const { return buffers_; }
  /// Replaces the momentum buffers (checkpoint restore); shapes must match.
  void load_momentum_buffers(std::vector<Tensor<Real>> buffers);
  std::span<Parameter<Real>* const> params() const { return params_; }

 private:
  std::vector<Parameter<Real>*> params_;
  std::vector<Tensor<Real>> buffers_;
  SgdConfig config_;
};

extern template class Sgd<float>;
extern template class Sgd<double>;

}  // namespace qat::ad
