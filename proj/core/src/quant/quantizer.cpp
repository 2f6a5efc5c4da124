// SPDX-License-Identifier: Apache-2.0
#include "qat/quant/quantizer.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "qat/autodiff/ops.hpp"
#include "qat/error.hpp"

namespace qat::quant {

namespace {

void check_bits(int bits) {
  if (bits < 1 || bits > kFullPrecision) {
    throw QuantDomainError("bit-width must be in [1,32], got " + std::to_string(bits));
  }
}

template <class Real>
Real step_count(int bits) {
  return static_cast<Real>((std::uint64_t{1} << bits) - 1);
}

// Largest |tanh(w)| and the first index attaining it.
template <class Real>
std::pair<Real, std::size_t> max_abs(std::span<const Real> t) {
  Real m = 0;
  std::size_t at = 0;
  for (std::size_t i = 0; i < t.size(); ++i) {
    if (std::abs(t[i]) > m) {
      m = std::abs(t[i]);
      at = i;
    }
  }
  return {m, at};
}

template <class Real>
ad::Tensor<Real> normalize(const ad::Tensor<Real>& t, Real m) {
  ad::Tensor<Real> n = t;
  for (auto& v : n.data()) v = v / (Real(2) * m) + Real(0.5);
  return n;
}

}  // namespace

void QuantConfig::validate() const {
  if (weight_bits < 1 || weight_bits > kFullPrecision) {
    throw ConfigError("weight_bits must be in [1,32], got " + std::to_string(weight_bits));
  }
  if (act_bits < 1 || act_bits > kFullPrecision) {
    throw ConfigError("act_bits must be in [1,32], got " + std::to_string(act_bits));
  }
}

std::uint64_t level_count(int bits) {
  if (bits < 1 || bits >= kFullPrecision) {
    throw QuantDomainError("level_count needs 1 <= k < 32, got " + std::to_string(bits));
  }
  return std::uint64_t{1} << bits;
}

template <class Real>
Real level(int bits, std::uint64_t i) {
  return static_cast<Real>(i) / step_count<Real>(bits);
}

template <class Real>
Real quantize_unit(Real z, int bits) {
  check_bits(bits);
  if (!(z >= Real(0) && z <= Real(1))) {
    throw QuantDomainError("quantize_unit: input " + std::to_string(z) + " outside [0,1]");
  }
  if (bits == kFullPrecision) return z;
  const Real n = step_count<Real>(bits);
  return std::round(n * z) / n;
}

template <class Real>
ad::Var<Real> quantize_unit(ad::Var<Real> z, int bits) {
  check_bits(bits);
  ad::Tensor<Real> out = z.value();
  for (auto& v : out.data()) v = quantize_unit(v, bits);
  return z.graph().record("quantize_unit", {z}, std::move(out), [](const ad::BackwardArgs<Real>& a) {
    auto g = a.grad_out.data();
    auto d = a.grad_in[0]->data();
    for (std::size_t i = 0; i < g.size(); ++i) d[i] += g[i];
  });
}

template <class Real>
ad::Var<Real> quantize_activations(ad::Var<Real> x, int bits) {
  check_bits(bits);
  if (bits == kFullPrecision) return x;
  return quantize_unit(ad::clip01(x), bits);
}

template <class Real>
ad::Var<Real> quantize_weights(ad::Var<Real> w, int bits, bool affine_map) {
  check_bits(bits);
  if (bits == kFullPrecision) return w;
  auto& g = w.graph();
  auto t = ad::tanh(w);
  const auto [m, at] = max_abs<Real>(t.value().data());
  if (m == Real(0)) {
    return g.record("quantize_weights_zero", {w}, ad::Tensor<Real>(w.shape()),
                    [](const ad::BackwardArgs<Real>&) {});
  }
  // n_i = t_i / (2m) + 1/2 with m = |t_at|; the max contributes through t_at.
  auto n = g.record("tanh_normalize", {t}, normalize(t.value(), m),
                    [m, at](const ad::BackwardArgs<Real>& a) {
                      auto gn = a.grad_out.data();
                      auto tv = a.in[0]->data();
                      auto dt = a.grad_in[0]->data();
                      const Real inv = Real(1) / (Real(2) * m);
                      double through_max = 0.0;
                      for (std::size_t i = 0; i < gn.size(); ++i) {
                        dt[i] += gn[i] * inv;
                        through_max += static_cast<double>(gn[i]) * tv[i];
                      }
                      const Real sign = tv[at] < Real(0) ? Real(-1) : Real(1);
                      dt[at] -= static_cast<Real>(through_max) * sign / (Real(2) * m * m);
                    });
  auto q = quantize_unit(n, bits);
  if (!affine_map) return q;
  ad::Tensor<Real> out = q.value();
  for (auto& v : out.data()) v = Real(2) * v - Real(1);
  return g.record("affine_pm1", {q}, std::move(out), [](const ad::BackwardArgs<Real>& a) {
    auto gq = a.grad_out.data();
    auto d = a.grad_in[0]->data();
    for (std::size_t i = 0; i < gq.size(); ++i) d[i] += Real(2) * gq[i];
  });
}

template <class Real>
ad::Var<Real> scalar_layer(ad::Var<Real> x, ad::Var<Real> alpha) {
  return ad::scale_layer(x, alpha);
}

template <class Real>
ad::Tensor<Real> quantize_activations(const ad::Tensor<Real>& x, int bits) {
  check_bits(bits);
  if (bits == kFullPrecision) return x;
  ad::Tensor<Real> out = x;
  for (auto& v : out.data()) v = quantize_unit(std::clamp(v, Real(0), Real(1)), bits);
  return out;
}

template <class Real>
ad::Tensor<Real> quantize_weights(const ad::Tensor<Real>& w, int bits, bool affine_map) {
  check_bits(bits);
  if (bits == kFullPrecision) return w;
  ad::Tensor<Real> t = w;
  for (auto& v : t.data()) v = std::tanh(v);
  const Real m = max_abs<Real>(t.data()).first;
  if (m == Real(0)) return ad::Tensor<Real>(w.shape());
  ad::Tensor<Real> out = normalize(t, m);
  for (auto& v : out.data()) {
    v = quantize_unit(v, bits);
    if (affine_map) v = Real(2) * v - Real(1);
  }
  return out;
}

#define QAT_INSTANTIATE_QUANT(R)                                                  \
  template R level<R>(int, std::uint64_t);                                        \
  template R quantize_unit<R>(R, int);                                            \
  template ad::Var<R> quantize_unit<R>(ad::Var<R>, int);                          \
  template ad::Var<R> quantize_activations<R>(ad::Var<R>, int);                   \
  template ad::Var<R> quantize_weights<R>(ad::Var<R>, int, bool);                 \
  template ad::Var<R> scalar_layer<R>(ad::Var<R>, ad::Var<R>);                    \
  template ad::Tensor<R> quantize_activations<R>(const ad::Tensor<R>&, int);      \
  template ad::Tensor<R> quantize_weights<R>(const ad::Tensor<R>&, int, bool);

QAT_INSTANTIATE_QUANT(float)
QAT_INSTANTIATE_QUANT(double)

#undef QAT_INSTANTIATE_QUANT

}  // namespace qat::quant
