// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "qat/quant/quantizer.hpp"
#include "qat/strategies/schedule.hpp"

namespace qat::strategies {

struct StrategySet {
  bool ts = false;
  bool pq = false;
  bool guided = false;

  bool empty() const { return !ts && !pq && !guided; }
  std::string to_string() const;
  /// Comma-separated subset of {ts, pq, guided}; order and case ignored.
  static StrategySet parse(const std::string& text);
  friend bool operator==(const StrategySet&, const StrategySet&) = default;
};

struct PlanOptions {
  BitSchedule schedule{{32, 8, 4, 2}};
  /// Activation bits of the first two-stage stage. 32 keeps activations in
  /// full precision; `stage1_prev` uses the previous rung's bits instead.
  int stage1_act_bits = quant::kFullPrecision;
  bool stage1_prev = false;
  bool quantize_first_last = true;
  bool weight_affine_map = true;
};

struct Phase {
  std::size_t index = 0;  // 1-based position in the plan
  std::string name;
  quant::QuantConfig qc;
  bool guided = false;
  int rung = 0;   // weight bits of the rung this phase belongs to
  int stage = 0;  // 1 or 2 inside a two-stage pair, else 0
};

struct Plan {
  StrategySet strategies;
  std::vector<Phase> phases;

  bool guided() const { return strategies.guided; }
  /// One line per phase.
  std::string describe() const;
};

/// Expands a strategy set into the ordered list of training phases.
/// Without pq only the target precision is visited; ts splits each
/// precision into a weights-only stage and a full stage; guided attaches
/// the full-precision twin to every phase.
Plan compose(const StrategySet& strategies, const PlanOptions& options);

}  // namespace qat::strategies
