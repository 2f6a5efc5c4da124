// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "qat/data/batches.hpp"
#include "qat/data/dataset.hpp"
#include "qat/nn/model.hpp"
#include "qat/strategies/schedule.hpp"

namespace qat::strategies {

struct EpochRecord {
  std::string phase;
  int epoch = 0;
  double lr = 0.0;
  double train_loss = 0.0;
  double train_acc = 0.0;
  double val_acc = 0.0;
  std::optional<double> guidance_loss;
  double wall_ms = 0.0;
};

struct EvalResult {
  double top1 = 0.0;
  double top5 = 0.0;  // top-min(5, classes)
  double loss = 0.0;
  std::size_t count = 0;
};

/// Eval-mode pass over `data` in index order.
template <class Real>
EvalResult evaluate(nn::Model<Real>& model, const data::Dataset& data, std::size_t batch_size = 500);

/// Shared state of one experiment's training loop. `rng` supplies one seed
/// per epoch for shuffling and augmentation and is part of the checkpoint.
struct TrainContext {
  const data::Dataset* train = nullptr;
  const data::Dataset* val = nullptr;
  data::AugmentConfig augment;
  std::size_t prefetch = 0;
  std::size_t eval_batch = 500;
  std::mt19937_64* rng = nullptr;
  bool deterministic = false;
};

/// Totals of one optimisation step over a mini-batch.
struct StepStats {
  double loss = 0.0;          // mean loss of the batch
  std::size_t correct = 0;    // top-1 hits of the trained model
  std::optional<double> guidance;
};

template <class Real>
using StepFn = std::function<StepStats(const data::Batch<Real>& batch)>;

struct TrainHooks {
  std::function<void(const EpochRecord&)> on_epoch;
};

/// Rows whose arg-max equals the label.
template <class Real>
std::size_t count_correct(const ad::Tensor<Real>& logits, std::span<const int> labels);

/// Generic epoch loop: sets the learning rate, streams shuffled batches
/// through `step`, then evaluates `eval_model` on the validation split.
/// A non-finite loss raises TrainingError naming the phase, epoch and step.
template <class Real>
std::vector<EpochRecord> train_epochs(const std::string& phase, const TrainSchedule& schedule,
                                      TrainContext& ctx, std::vector<ad::Sgd<Real>*> optimizers,
                                      const StepFn<Real>& step, nn::Model<Real>& eval_model,
                                      const TrainHooks& hooks = {});

/// Plain cross-entropy training of one model.
template <class Real>
std::vector<EpochRecord> train_model(nn::Model<Real>& model, const std::string& phase,
                                     const TrainSchedule& schedule, TrainContext& ctx,
                                     const TrainHooks& hooks = {},
                                     ad::Sgd<Real>* optimizer = nullptr);

}  // namespace qat::strategies
