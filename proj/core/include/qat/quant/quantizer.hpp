// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>

#include "qat/autodiff/graph.hpp"
#include "qat/autodiff/tensor.hpp"

namespace qat::quant {

/// Bit-width that means "leave this part in full precision".
inline constexpr int kFullPrecision = 32;

/// Initial value of the trainable output multiplier of quantized models.
inline constexpr double kScalarLayerInit = 0.01;

struct QuantConfig {
  int weight_bits = kFullPrecision;
  int act_bits = kFullPrecision;
  /// When false the first convolution and the last fully-connected layer
  /// keep full-precision weights.
  bool quantize_first_last = true;
  /// Map quantized weights from [0,1] to [-1,1] with 2q - 1.
  bool weight_affine_map = true;

  bool quantizes_weights() const { return weight_bits < kFullPrecision; }
  bool quantizes_acts() const { return act_bits < kFullPrecision; }
  bool any() const { return quantizes_weights() || quantizes_acts(); }

  /// Throws ConfigError unless both bit-widths lie in [1, 32].
  void validate() const;

  friend bool operator==(const QuantConfig&, const QuantConfig&) = default;
};

/// Number of representable levels 2^k (k < 32).
std::uint64_t level_count(int bits);

/// The i-th level i / (2^k - 1), computed the same way the quantizer does.
template <class Real>
Real level(int bits, std::uint64_t i);

/// round((2^k - 1) z) / (2^k - 1) with ties away from zero. k = 32 returns z.
/// Throws QuantDomainError when z is outside [0, 1] or k outside [1, 32].
template <class Real>
Real quantize_unit(Real z, int bits);

/// Graph version of quantize_unit. Backward is the straight-through
/// estimator: the upstream gradient is passed on unchanged.
template <class Real>
ad::Var<Real> quantize_unit(ad::Var<Real> z, int bits);

/// quantize_unit(clip(x, 0, 1)); the clip contributes its gradient mask.
/// At k = 32 the input is returned as-is (no node is recorded).
template <class Real>
ad::Var<Real> quantize_activations(ad::Var<Real> x, int bits);

/// Per-tensor weight quantizer:
///   n = tanh(W) / (2 max|tanh(W)|) + 1/2,  q = quantize_unit(n, k),
///   result = 2q - 1 (or q without the affine map).
/// An all-zero tensor maps to all zeros. At k = 32 the input is returned.
template <class Real>
ad::Var<Real> quantize_weights(ad::Var<Real> w, int bits, bool affine_map = true);

/// alpha * x. The quantized models put this after the classifier.
template <class Real>
ad::Var<Real> scalar_layer(ad::Var<Real> x, ad::Var<Real> alpha);

/// Graph-free forms with values identical to the graph versions.
template <class Real>
ad::Tensor<Real> quantize_activations(const ad::Tensor<Real>& x, int bits);
template <class Real>
ad::Tensor<Real> quantize_weights(const ad::Tensor<Real>& w, int bits, bool affine_map = true);

}  // namespace qat::quant
