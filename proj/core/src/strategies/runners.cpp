// SPDX-License-Identifier: Apache-2.0
#include "qat/strategies/runners.hpp"

#include "qat/error.hpp"
#include "qat/strategies/guided.hpp"

namespace qat::strategies {

template <class Real>
std::vector<PhaseResult> execute_plan(nn::Model<Real>& model, nn::Model<Real>* twin, const Plan& plan,
                                      std::size_t first, const TrainSchedule& schedule,
                                      const GuidedConfig& guided, TrainContext& ctx,
                                      const PlanHooks& hooks) {
  if (plan.phases.empty()) throw ConfigError("empty plan");
  if (first > plan.phases.size()) throw ConfigError("plan has no phase " + std::to_string(first + 1));
  if (plan.guided()) {
    if (!twin) throw ConfigError("guided plan needs a full-precision twin");
    if (twin->quant_config().any()) throw ConfigError("the guided twin must be full precision");
    if (twin->spec().hash() != model.spec().hash()) {
      throw ConfigError("guided twin architecture differs from the trained model");
    }
  }
  std::vector<PhaseResult> results;
  for (std::size_t i = first; i < plan.phases.size(); ++i) {
    const Phase& phase = plan.phases[i];
    model.set_quant_config(phase.qc);
    PhaseResult r;
    r.phase = phase;
    r.start_hash = model.state_hash();
    r.initial_val_acc = evaluate(model, *ctx.val, ctx.eval_batch).top1;
    if (phase.guided) {
      r.log = train_guided(model, *twin, guided, phase.name, schedule, ctx, hooks.train);
      r.twin_end_hash = twin->state_hash();
    } else {
      r.log = train_model(model, phase.name, schedule, ctx, hooks.train);
    }
    r.end_hash = model.state_hash();
    if (hooks.on_phase) hooks.on_phase(r);
    results.push_back(std::move(r));
  }
  return results;
}

namespace {

void require_lower(int k, int current) {
  if (k >= current) {
    throw ConfigError("target precision " + std::to_string(k) +
                      " must be below the model's current " + std::to_string(current) + " bits");
  }
}

}  // namespace

template <class Real>
std::vector<PhaseResult> run_two_stage(nn::Model<Real>& model, int k, int stage1_act_bits,
                                       const TrainSchedule& schedule, TrainContext& ctx,
                                       const PlanHooks& hooks) {
  require_lower(k, model.quant_config().weight_bits);
  PlanOptions opt;
  opt.schedule = BitSchedule{{32, k}};
  opt.stage1_act_bits = stage1_act_bits;
  opt.quantize_first_last = model.quant_config().quantize_first_last;
  opt.weight_affine_map = model.quant_config().weight_affine_map;
  const Plan plan = compose(StrategySet{true, false, false}, opt);
  return execute_plan<Real>(model, nullptr, plan, 0, schedule, GuidedConfig{}, ctx, hooks);
}

template <class Real>
std::vector<PhaseResult> run_progressive(nn::Model<Real>& model, const BitSchedule& bits,
                                         const TrainSchedule& schedule, TrainContext& ctx,
                                         const PlanHooks& hooks) {
  bits.validate();
  PlanOptions opt;
  opt.schedule = bits;
  opt.quantize_first_last = model.quant_config().quantize_first_last;
  opt.weight_affine_map = model.quant_config().weight_affine_map;
  const Plan plan = compose(StrategySet{false, true, false}, opt);
  return execute_plan<Real>(model, nullptr, plan, 0, schedule, GuidedConfig{}, ctx, hooks);
}

template <class Real>
std::vector<PhaseResult> run_guided(nn::Model<Real>& low, nn::Model<Real>& full, int k,
                                    const GuidedConfig& cfg, const TrainSchedule& schedule,
                                    TrainContext& ctx, const PlanHooks& hooks) {
  require_lower(k, low.quant_config().weight_bits);
  PlanOptions opt;
  opt.schedule = BitSchedule{{32, k}};
  opt.quantize_first_last = low.quant_config().quantize_first_last;
  opt.weight_affine_map = low.quant_config().weight_affine_map;
  const Plan plan = compose(StrategySet{false, false, true}, opt);
  return execute_plan<Real>(low, &full, plan, 0, schedule, cfg, ctx, hooks);
}

#define QAT_INSTANTIATE_RUNNERS(R)                                                               \
  template std::vector<PhaseResult> execute_plan<R>(nn::Model<R>&, nn::Model<R>*, const Plan&,   \
                                                    std::size_t, const TrainSchedule&,           \
                                                    const GuidedConfig&, TrainContext&,          \
                                                    const PlanHooks&);                           \
  template std::vector<PhaseResult> run_two_stage<R>(nn::Model<R>&, int, int,                    \
                                                     const TrainSchedule&, TrainContext&,        \
                                                     const PlanHooks&);                          \
  template std::vector<PhaseResult> run_progressive<R>(nn::Model<R>&, const BitSchedule&,        \
                                                       const TrainSchedule&, TrainContext&,      \
                                                       const PlanHooks&);                        \
  template std::vector<PhaseResult> run_guided<R>(nn::Model<R>&, nn::Model<R>&, int,             \
                                                  const GuidedConfig&, const TrainSchedule&,     \
                                                  TrainContext&, const PlanHooks&);

QAT_INSTANTIATE_RUNNERS(float)
QAT_INSTANTIATE_RUNNERS(double)

}  // namespace qat::strategies
