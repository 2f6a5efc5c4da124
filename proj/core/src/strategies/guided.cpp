// SPDX-License-Identifier: Apache-2.0
#include "qat/strategies/guided.hpp"

#include <optional>

#include "qat/autodiff/ops.hpp"
#include "qat/error.hpp"
#include "qat/quant/quantizer.hpp"

namespace qat::strategies {

template <class Real>
ad::Var<Real> guidance_loss(const std::map<std::string, ad::Var<Real>>& full_taps,
                            const std::map<std::string, ad::Var<Real>>& low_taps, int act_bits) {
  if (full_taps.empty()) throw ShapeError("guidance loss: no taps");
  if (full_taps.size() != low_taps.size()) throw ShapeError("guidance loss: tap sets differ");
  std::optional<ad::Var<Real>> total;
  for (const auto& [id, mu] : full_taps) {
    auto it = low_taps.find(id);
    if (it == low_taps.end()) throw ShapeError("guidance loss: tap '" + id + "' missing from the low-precision net");
    const ad::Var<Real>& nu = it->second;
    if (mu.shape() != nu.shape()) {
      throw ShapeError("guidance loss: tap '" + id + "' shapes " + ad::to_string(mu.shape()) +
                       " and " + ad::to_string(nu.shape()) + " differ");
    }
    auto term = ad::mse_half(quant::quantize_activations(mu, act_bits), nu);
    total = total ? ad::add(*total, term) : term;
  }
  return *total;
}

template <class Real>
std::vector<EpochRecord> train_guided(nn::Model<Real>& low, nn::Model<Real>& full,
                                      const GuidedConfig& cfg, const std::string& phase,
                                      const TrainSchedule& schedule, TrainContext& ctx,
                                      const TrainHooks& hooks) {
  cfg.validate();
  if (low.spec().tap_ids() != full.spec().tap_ids()) {
    throw ConfigError("guided twins declare different taps");
  }
  ad::Sgd<Real> opt_low(low.parameters(), schedule.sgd);
  std::optional<ad::Sgd<Real>> opt_full;
  if (cfg.joint) opt_full.emplace(full.parameters(), schedule.sgd);

  StepFn<Real> step = [&](const data::Batch<Real>& batch) {
    opt_low.zero_grad();
    if (opt_full) opt_full->zero_grad();
    ad::Graph<Real> g;
    const std::span<const int> labels(batch.labels);
    auto lo = low.forward(g, batch.images, nn::Mode::train);
    auto fu = full.forward(g, batch.images, nn::Mode::train, {cfg.joint, cfg.joint});
    auto r = guidance_loss(fu.taps, lo.taps, low.quant_config().act_bits);
    auto loss = ad::softmax_cross_entropy(lo.logits, labels);
    StepStats s;
    s.loss = static_cast<double>(loss.value().item());
    s.correct = count_correct(lo.logits.value(), labels);
    s.guidance = static_cast<double>(r.value().item());
    if (cfg.joint) loss = ad::add(loss, ad::softmax_cross_entropy(fu.logits, labels));
    if (cfg.lambda > 0.0) loss = ad::add(loss, ad::mul_scalar(r, static_cast<Real>(cfg.lambda)));
    g.backward(loss);
    opt_low.step();
    if (opt_full) opt_full->step();
    return s;
  };
  std::vector<ad::Sgd<Real>*> opts{&opt_low};
  if (opt_full) opts.push_back(&*opt_full);
  return train_epochs<Real>(phase, schedule, ctx, opts, step, low, hooks);
}

#define QAT_INSTANTIATE_GUIDED(R)                                                              \
  template ad::Var<R> guidance_loss<R>(const std::map<std::string, ad::Var<R>>&,               \
                                       const std::map<std::string, ad::Var<R>>&, int);         \
  template std::vector<EpochRecord> train_guided<R>(nn::Model<R>&, nn::Model<R>&,              \
                                                    const GuidedConfig&, const std::string&,   \
                                                    const TrainSchedule&, TrainContext&,       \
                                                    const TrainHooks&);

QAT_INSTANTIATE_GUIDED(float)
QAT_INSTANTIATE_GUIDED(double)

}  // namespace qat::strategies
