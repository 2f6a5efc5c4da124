// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "qat/autodiff/sgd.hpp"

namespace qat::strategies {

/// Precisions visited by progressive quantization, e.g. {32, 8, 4, 2}.
struct BitSchedule {
  std::vector<int> bits;

  /// Throws ConfigError unless bits[0] == 32, bits is strictly decreasing,
  /// has at least two entries and every entry is >= 1.
  void validate() const;
  int target() const { return bits.back(); }
  std::string to_string() const;
  /// Parses "32,8,4,2".
  static BitSchedule parse(const std::string& text);
};

/// Step decay: initial * factor^floor(epoch / period).
struct LrSchedule {
  double initial = 0.001;
  double factor = 0.1;
  int period = 10;

  double at(int epoch) const;
};

struct TrainSchedule {
  int epochs = 15;
  std::size_t batch_size = 64;
  LrSchedule lr;
  ad::SgdConfig sgd;  // sgd.lr is overwritten by `lr` every epoch

  void validate() const;
};

struct GuidedConfig {
  double lambda = 1.0;
  /// When false the full-precision twin is frozen.
  bool joint = true;

  void validate() const;
};

}  // namespace qat::strategies
