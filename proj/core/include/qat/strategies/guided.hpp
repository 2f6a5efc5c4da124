// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <map>
#include <string>
#include <vector>

#include "qat/autodiff/graph.hpp"
#include "qat/nn/model.hpp"
#include "qat/strategies/schedule.hpp"
#include "qat/strategies/trainer.hpp"

namespace qat::strategies {

/// Sum over taps of mean(0.5 * (Q(mu) - nu)^2), Q being the activation
/// quantizer at `act_bits`. Gradients reach both nets; through Q they pass
/// straight through. Throws ShapeError on mismatched keys or shapes.
template <class Real>
ad::Var<Real> guidance_loss(const std::map<std::string, ad::Var<Real>>& full_taps,
                            const std::map<std::string, ad::Var<Real>>& low_taps, int act_bits);

/// Trains `low` against the cross-entropy plus lambda * guidance, and
/// (when cfg.joint) `full` against its own cross-entropy plus the same
/// guidance term. Both nets see each mini-batch once, in one shared
/// forward pass; the low-precision optimizer steps first.
template <class Real>
std::vector<EpochRecord> train_guided(nn::Model<Real>& low, nn::Model<Real>& full,
                                      const GuidedConfig& cfg, const std::string& phase,
                                      const TrainSchedule& schedule, TrainContext& ctx,
                                      const TrainHooks& hooks = {});

}  // namespace qat::strategies
