// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "qat/nn/model.hpp"
#include "qat/strategies/plan.hpp"
#include "qat/strategies/schedule.hpp"
#include "qat/strategies/trainer.hpp"

namespace qat::strategies {

struct PhaseResult {
  Phase phase;
  double initial_val_acc = 0.0;  // before the first update of the phase
  std::vector<EpochRecord> log;
  std::uint64_t start_hash = 0;
  std::uint64_t end_hash = 0;
  std::uint64_t twin_end_hash = 0;
};

struct PlanHooks {
  TrainHooks train;
  /// Called after each phase, e.g. to write its checkpoint.
  std::function<void(const PhaseResult&)> on_phase;
};

/// Runs phases [first, plan.phases.size()) of `plan` in order, each one
/// starting from where the previous one left `model`. Every phase gets a
/// fresh optimizer. `twin` is required when the plan is guided.
template <class Real>
std::vector<PhaseResult> execute_plan(nn::Model<Real>& model, nn::Model<Real>* twin, const Plan& plan,
                                      std::size_t first, const TrainSchedule& schedule,
                                      const GuidedConfig& guided, TrainContext& ctx,
                                      const PlanHooks& hooks = {});

/// Weights-only stage at k bits (activations at `stage1_act_bits`), then
/// weights and activations at k, initialised from stage 1.
template <class Real>
std::vector<PhaseResult> run_two_stage(nn::Model<Real>& model, int k, int stage1_act_bits,
                                       const TrainSchedule& schedule, TrainContext& ctx,
                                       const PlanHooks& hooks = {});

/// Quantized fine-tuning at every rung of `bits` after the first, each
/// initialised from the previous rung.
template <class Real>
std::vector<PhaseResult> run_progressive(nn::Model<Real>& model, const BitSchedule& bits,
                                         const TrainSchedule& schedule, TrainContext& ctx,
                                         const PlanHooks& hooks = {});

/// Guided training of `low` at k bits next to the full-precision `full`.
template <class Real>
std::vector<PhaseResult> run_guided(nn::Model<Real>& low, nn::Model<Real>& full, int k,
                                    const GuidedConfig& cfg, const TrainSchedule& schedule,
                                    TrainContext& ctx, const PlanHooks& hooks = {});

}  // namespace qat::strategies
