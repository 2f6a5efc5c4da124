// SPDX-License-Identifier: Apache-2.0
#include "qat/strategies/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>

#include "qat/error.hpp"

namespace qat::strategies {

template <class Real>
std::size_t count_correct(const ad::Tensor<Real>& logits, std::span<const int> labels) {
  const std::size_t n = logits.dim(0);
  const std::size_t c = logits.dim(1);
  std::size_t hits = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const Real* row = logits.data().data() + i * c;
    const auto best = static_cast<int>(std::max_element(row, row + c) - row);
    hits += best == labels[i];
  }
  return hits;
}

template <class Real>
EvalResult evaluate(nn::Model<Real>& model, const data::Dataset& dataset, std::size_t batch_size) {
  data::BatchStream<Real> stream(dataset, batch_size, false, data::AugmentConfig{}, 0);
  const std::size_t classes = model.spec().classes;
  const std::size_t topk = std::min<std::size_t>(5, classes);
  std::size_t top1 = 0;
  std::size_t top5 = 0;
  double loss = 0.0;
  std::vector<std::size_t> idx(classes);
  while (auto batch = stream.next()) {
    ad::Graph<Real> g;
    auto out = model.forward(g, batch->images, nn::Mode::eval, {false, false});
    const auto& logits = out.logits.value();
    auto ce = ad::softmax_cross_entropy(out.logits, std::span<const int>(batch->labels));
    loss += static_cast<double>(ce.value().item()) * static_cast<double>(batch->labels.size());
    for (std::size_t i = 0; i < batch->labels.size(); ++i) {
      const Real* row = logits.data().data() + i * classes;
      std::iota(idx.begin(), idx.end(), std::size_t{0});
      // Ties resolve to the lower class index, matching max_element.
      std::partial_sort(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(topk), idx.end(),
                        [&](std::size_t a, std::size_t b) {
                          return row[a] > row[b] || (row[a] == row[b] && a < b);
                        });
      const auto label = static_cast<std::size_t>(batch->labels[i]);
      top1 += idx[0] == label;
      top5 += std::find(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(topk), label) !=
              idx.begin() + static_cast<std::ptrdiff_t>(topk);
    }
  }
  const auto n = static_cast<double>(dataset.size());
  return EvalResult{top1 / n, top5 / n, loss / n, dataset.size()};
}

template <class Real>
std::vector<EpochRecord> train_epochs(const std::string& phase, const TrainSchedule& schedule,
                                      TrainContext& ctx, std::vector<ad::Sgd<Real>*> optimizers,
                                      const StepFn<Real>& step, nn::Model<Real>& eval_model,
                                      const TrainHooks& hooks) {
  schedule.validate();
  if (!ctx.train || !ctx.val || !ctx.rng) throw ConfigError("training context is incomplete");
  std::vector<EpochRecord> log;
  for (int epoch = 0; epoch < schedule.epochs; ++epoch) {
    const auto start = std::chrono::steady_clock::now();
    const double lr = schedule.lr.at(epoch);
    for (auto* opt : optimizers) opt->set_lr(lr);
    const std::uint64_t seed = (*ctx.rng)();
    data::BatchStream<Real> stream(*ctx.train, schedule.batch_size, true, ctx.augment, seed,
                                   ctx.prefetch);
    double loss_sum = 0.0;
    double guide_sum = 0.0;
    bool guided = false;
    std::size_t correct = 0;
    std::size_t seen = 0;
    std::size_t step_index = 0;
    while (auto batch = stream.next()) {
      StepStats s;
      try {
        s = step(*batch);
      } catch (const NonFiniteError& e) {
        throw TrainingError("phase " + phase + ", epoch " + std::to_string(epoch) + ", step " +
                            std::to_string(step_index) + ": " + e.what());
      }
      if (!std::isfinite(s.loss)) {
        throw TrainingError("phase " + phase + ", epoch " + std::to_string(epoch) + ", step " +
                            std::to_string(step_index) + ": loss is not finite");
      }
      const std::size_t n = batch->labels.size();
      loss_sum += s.loss * static_cast<double>(n);
      correct += s.correct;
      seen += n;
      if (s.guidance) {
        guided = true;
        guide_sum += *s.guidance * static_cast<double>(n);
      }
      ++step_index;
    }
    EpochRecord r;
    r.phase = phase;
    r.epoch = epoch;
    r.lr = lr;
    r.train_loss = loss_sum / static_cast<double>(seen);
    r.train_acc = static_cast<double>(correct) / static_cast<double>(seen);
    r.val_acc = evaluate(eval_model, *ctx.val, ctx.eval_batch).top1;
    if (guided) r.guidance_loss = guide_sum / static_cast<double>(seen);
    r.wall_ms = ctx.deterministic
                    ? 0.0
                    : std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
    log.push_back(r);
    if (hooks.on_epoch) hooks.on_epoch(r);
  }
  return log;
}

template <class Real>
std::vector<EpochRecord> train_model(nn::Model<Real>& model, const std::string& phase,
                                     const TrainSchedule& schedule, TrainContext& ctx,
                                     const TrainHooks& hooks, ad::Sgd<Real>* optimizer) {
  std::optional<ad::Sgd<Real>> own;
  if (!optimizer) {
    own.emplace(model.parameters(), schedule.sgd);
    optimizer = &*own;
  }
  StepFn<Real> step = [&](const data::Batch<Real>& batch) {
    optimizer->zero_grad();
    ad::Graph<Real> g;
    auto out = model.forward(g, batch.images, nn::Mode::train);
    auto loss = ad::softmax_cross_entropy(out.logits, std::span<const int>(batch.labels));
    StepStats s;
    s.loss = static_cast<double>(loss.value().item());
    s.correct = count_correct(out.logits.value(), std::span<const int>(batch.labels));
    g.backward(loss);
    optimizer->step();
    return s;
  };
  return train_epochs<Real>(phase, schedule, ctx, {optimizer}, step, model, hooks);
}

#define QAT_INSTANTIATE_TRAINER(R)                                                              \
  template std::size_t count_correct<R>(const ad::Tensor<R>&, std::span<const int>);            \
  template EvalResult evaluate<R>(nn::Model<R>&, const data::Dataset&, std::size_t);            \
  template std::vector<EpochRecord> train_epochs<R>(const std::string&, const TrainSchedule&,   \
                                                    TrainContext&, std::vector<ad::Sgd<R>*>,    \
                                                    const StepFn<R>&, nn::Model<R>&,            \
                                                    const TrainHooks&);                         \
  template std::vector<EpochRecord> train_model<R>(nn::Model<R>&, const std::string&,           \
                                                   const TrainSchedule&, TrainContext&,         \
                                                   const TrainHooks&, ad::Sgd<R>*);

QAT_INSTANTIATE_TRAINER(float)
QAT_INSTANTIATE_TRAINER(double)

}  // namespace qat::strategies
