// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "qat/autodiff/graph.hpp"
#include "qat/autodiff/tensor.hpp"

namespace qat::ad {

/// (M,K) x (K,N) -> (M,N); with `transpose_b` the right operand is (N,K).
template <class Real>
Var<Real> matmul(Var<Real> a, Var<Real> b, bool transpose_b = false);

struct Conv2dAttrs {
  std::size_t stride = 1;
  std::size_t pad = 0;
};

/// x (N,C,H,W), weight (O,C,KH,KW) -> (N,O,OH,OW). Patch-gather + GEMM.
template <class Real>
Var<Real> conv2d(Var<Real> x, Var<Real> weight, Conv2dAttrs attrs = {});

/// Elementwise sum. `b` may also be a bias matching the trailing dims of `a`.
template <class Real>
Var<Real> add(Var<Real> a, Var<Real> b);

template <class Real>
Var<Real> mul_scalar(Var<Real> x, Real c);

template <class Real>
Var<Real> relu(Var<Real> x);

/// clip(x, 0, 1); gradient passes only where 0 <= x <= 1.
template <class Real>
Var<Real> clip01(Var<Real> x);

template <class Real>
Var<Real> tanh(Var<Real> x);

enum class BnMode { train, eval };

template <class Real>
struct BatchNormBuffers {
  Tensor<Real> running_mean;
  Tensor<Real> running_var;
  Real momentum = Real(0.1);
  Real eps = Real(1e-5);

  BatchNormBuffers() = default;
  explicit BatchNormBuffers(std::size_t channels)
      : running_mean(Shape{channels}, Real(0)), running_var(Shape{channels}, Real(1)) {}
};

/// Per-channel batch normalisation over (N,C,H,W) or (N,C). In train mode
/// batch statistics are used and, when `update_running` is set, folded
/// into the running buffers with the momentum rule.
template <class Real>
Var<Real> batchnorm2d(Var<Real> x, Var<Real> gamma, Var<Real> beta, BatchNormBuffers<Real>& buffers,
                      BnMode mode, bool update_running = true);

struct PoolAttrs {
  std::size_t kernel = 2;  // 0 selects a global pool over H x W
  std::size_t stride = 2;
};

template <class Real>
Var<Real> maxpool2d(Var<Real> x, PoolAttrs attrs = {});

template <class Real>
Var<Real> avgpool2d(Var<Real> x, PoolAttrs attrs = {});

/// (N, ...) -> (N, prod(...)).
template <class Real>
Var<Real> flatten(Var<Real> x);

/// alpha * x for a one-element trainable alpha.
template <class Real>
Var<Real> scale_layer(Var<Real> x, Var<Real> alpha);

/// Mean over the batch of -log softmax(logits)[label].
template <class Real>
Var<Real> softmax_cross_entropy(Var<Real> logits, std::span<const int> labels);

/// mean(0.5 * (a - b)^2) over all elements; gradients reach both operands.
template <class Real>
Var<Real> mse_half(Var<Real> a, Var<Real> b);

/// Row-wise softmax of an (N,K) tensor; no graph involvement.
template <class Real>
Tensor<Real> softmax(const Tensor<Real>& logits);

}  // namespace qat::ad
