// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

#include "qat/autodiff/tensor.hpp"

namespace qat::testing {

/// Small seeded generator for property tests.
class Gen {
 public:
  explicit Gen(std::uint64_t seed) : rng_(seed) {}

  double uniform(double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng_); }
  double normal(double mean = 0.0, double stddev = 1.0) {
    return std::normal_distribution<double>(mean, stddev)(rng_);
  }
  std::size_t index(std::size_t lo, std::size_t hi) {  // inclusive
    return std::uniform_int_distribution<std::size_t>(lo, hi)(rng_);
  }
  bool coin() { return index(0, 1) == 1; }

  template <class Real = double>
  ad::Tensor<Real> tensor(const ad::Shape& shape, double lo = -1.0, double hi = 1.0) {
    ad::Tensor<Real> t(shape);
    for (auto& v : t.data()) v = static_cast<Real>(uniform(lo, hi));
    return t;
  }

  template <class Real = double>
  ad::Tensor<Real> normal_tensor(const ad::Shape& shape, double stddev = 1.0) {
    ad::Tensor<Real> t(shape);
    for (auto& v : t.data()) v = static_cast<Real>(normal(0.0, stddev));
    return t;
  }

  /// Uniform values kept at least `gap` away from every point in `kinks`.
  ad::Tensor<double> tensor_avoiding(const ad::Shape& shape, double lo, double hi,
                                     const std::vector<double>& kinks, double gap = 1e-3) {
    ad::Tensor<double> t(shape);
    for (auto& v : t.data()) {
      do {
        v = uniform(lo, hi);
      } while (near(v, kinks, gap));
    }
    return t;
  }

  std::mt19937_64& engine() { return rng_; }

 private:
  static bool near(double v, const std::vector<double>& kinks, double gap) {
    for (double k : kinks) {
      if (std::abs(v - k) < gap) return true;
    }
    return false;
  }
  std::mt19937_64 rng_;
};

}  // namespace qat::testing
