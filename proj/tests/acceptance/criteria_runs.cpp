// SPDX-License-Identifier: Apache-2.0
#include <iostream>
#include <random>
#include <sstream>

#include "criteria.hpp"
#include "qat/autodiff/ops.hpp"
#include "qat/experiment/checkpoint.hpp"
#include "qat/experiment/runner.hpp"
#include "qat/io.hpp"
#include "qat/strategies/guided.hpp"
#include "qat/strategies/trainer.hpp"

namespace qat::acceptance {

namespace {

namespace fs = std::filesystem;
using experiment::ExperimentConfig;
using strategies::EpochRecord;

const std::map<std::string, std::string> kSmallMnist{
    {"dataset", "mnist"},      {"model", "mini-alexnet"}, {"width", "8"},
    {"train_subset", "2000"},  {"test_subset", "1000"},   {"pretrain_epochs", "1"},
    {"phase_epochs", "1"},     {"seed", "0"}};

std::map<std::string, std::string> with(std::map<std::string, std::string> base,
                                        const std::map<std::string, std::string>& extra) {
  for (const auto& [k, v] : extra) base[k] = v;
  return base;
}

std::uint64_t grad_hash(nn::Model<float>& m) {
  std::uint64_t h = 14695981039346656037ull;
  for (auto* p : m.parameters()) {
    const auto* b = reinterpret_cast<const unsigned char*>(p->grad.data().data());
    for (std::size_t i = 0; i < p->grad.size() * sizeof(float); ++i) {
      h ^= b[i];
      h *= 1099511628211ull;
    }
  }
  return h;
}

std::vector<std::string> csv_rows(const fs::path& path) {
  std::vector<std::string> rows;
  std::istringstream in(read_file(path));
  for (std::string l; std::getline(in, l);) rows.push_back(l);
  return rows;
}

strategies::TrainContext context(const experiment::Datasets& d, const ExperimentConfig& cfg, std::mt19937_64& rng) {
  strategies::TrainContext ctx;
  ctx.train = &d.train;
  ctx.val = &d.test;
  ctx.augment = cfg.augment;
  ctx.eval_batch = cfg.eval_batch_size;
  ctx.rng = &rng;
  ctx.deterministic = true;
  return ctx;
}

double wall_s(const std::vector<EpochRecord>& log) {
  double ms = 0;
  for (const auto& r : log) ms += r.wall_ms;
  return ms / 1000.0;
}

Outcome k32_equivalence(const Env& env) {
  const auto cfg = make_config(env, with(kSmallMnist, {{"width", "16"}, {"train_subset", "1000"}}));
  const experiment::Datasets d = experiment::load_datasets(cfg);
  const nn::ModelSpec spec = experiment::experiment_spec(cfg, d.train);
  nn::ModelSpec plain = spec;
  for (auto& l : plain.layers) {
    l.quantize_weights = false;
    l.quantize_acts = false;
  }

  struct Trace {
    std::vector<double> losses;
    std::vector<std::uint64_t> grads;
    std::vector<EpochRecord> log;
    std::uint64_t params = 0;
  };
  auto run = [&](const nn::ModelSpec& s, const quant::QuantConfig& qc) {
    Trace t;
    nn::Model<float> m(s, qc, cfg.seed);
    std::mt19937_64 rng(cfg.seed);
    auto ctx = context(d, cfg, rng);
    strategies::TrainSchedule sched = cfg.pretrain;
    sched.epochs = 2;
    ad::Sgd<float> opt(m.parameters(), sched.sgd);
    strategies::StepFn<float> step = [&](const data::Batch<float>& b) {
      opt.zero_grad();
      ad::Graph<float> g;
      auto out = m.forward(g, b.images, nn::Mode::train);
      auto loss = ad::softmax_cross_entropy(out.logits, std::span<const int>(b.labels));
      g.backward(loss);
      t.losses.push_back(loss.value().item());
      t.grads.push_back(grad_hash(m));
      opt.step();
      return strategies::StepStats{loss.value().item(),
                                   strategies::count_correct(out.logits.value(), std::span<const int>(b.labels)),
                                   std::nullopt};
    };
    t.log = strategies::train_epochs<float>("k32", sched, ctx, {&opt}, step, m);
    t.params = m.state_hash();
    return t;
  };
  const Trace q = run(spec, quant::QuantConfig{32, 32});
  const Trace p = run(plain, quant::QuantConfig{});
  Checks c;
  c.expect(q.losses.size() == p.losses.size() && !q.losses.empty(), "step counts");
  c.expect(q.losses == p.losses, "per-step losses bit-identical");
  c.expect(q.grads == p.grads, "per-step gradients bit-identical");
  c.expect(q.params == p.params, "final parameters and BN buffers bit-identical");
  bool epochs = q.log.size() == 2 && p.log.size() == 2;
  for (std::size_t i = 0; epochs && i < 2; ++i) {
    epochs = q.log[i].train_loss == p.log[i].train_loss && q.log[i].val_acc == p.log[i].val_acc;
  }
  c.expect(epochs, "epoch records identical");
  return c.outcome(std::to_string(q.losses.size()) + " steps over 2 epochs on 1000 MNIST images, final val_acc " +
                   fixed(q.log.back().val_acc));
}

Outcome accuracy_ladder(const Env& env) {
  std::vector<double> fp, r8, r4, max_phase;
  std::ostringstream sink;
  for (auto seed : env.seeds) {
    const fs::path out = env.work / ("ladder_" + std::to_string(seed));
    const std::map<std::string, std::string> base{{"dataset", "mnist"},       {"model", "mini-alexnet"},
                                                  {"seed", std::to_string(seed)}, {"pretrain_epochs", "3"},
                                                  {"phase_epochs", "1"},      {"deterministic", "false"}};
    const auto pre = experiment::cmd_pretrain(make_config(env, with(base, {{"out", (out / "pre").string()}})), sink);
    const auto q = experiment::cmd_quantize(
        make_config(env, with(base, {{"out", (out / "pq").string()},
                                     {"strategy", "pq"},
                                     {"bits", "4"},
                                     {"bit_schedule", "32,8,4"},
                                     {"init_checkpoint", pre.checkpoint.string()}})),
        sink);
    fp.push_back(pre.final_eval.top1);
    r8.push_back(q.phases.at(0).log.back().val_acc);
    r4.push_back(q.phases.at(1).log.back().val_acc);
    max_phase.push_back(std::max({wall_s(pre.log), wall_s(q.phases[0].log), wall_s(q.phases[1].log)}));
    std::cout << "  seed " << seed << ": fp32 " << fixed(fp.back()) << ", w8a8 " << fixed(r8.back()) << ", w4a4 "
              << fixed(r4.back()) << ", longest phase " << fixed(max_phase.back(), 1) << " s" << std::endl;
  }
  const double m_fp = median(fp), m8 = median(r8), m4 = median(r4);
  const double longest = *std::max_element(max_phase.begin(), max_phase.end());
  Checks c;
  c.expect(m_fp >= 0.97, "pretrain median " + fixed(m_fp) + " < 0.97");
  c.expect(m_fp - m8 <= 0.005, "8-bit gap " + fixed(m_fp - m8) + " > 0.005");
  c.expect(m_fp - m4 <= 0.015, "4-bit gap " + fixed(m_fp - m4) + " > 0.015");
  c.expect(longest <= 600.0, "longest phase " + fixed(longest, 1) + " s > 600 s");
  return c.outcome("seed medians: fp32 " + fixed(m_fp) + ", w8a8 " + fixed(m8) + " (gap " + fixed(m_fp - m8) +
                   "), w4a4 " + fixed(m4) + " (gap " + fixed(m_fp - m4) + "); longest phase " + fixed(longest, 1) + " s");
}

Outcome strategy_ordering(const Env& env) {
  std::vector<double> baseline, ts, full;
  std::ostringstream sink;
  for (auto seed : env.seeds) {
    const fs::path out = env.work / ("ordering_" + std::to_string(seed));
    const std::map<std::string, std::string> base{
        {"dataset", "cifar10"},   {"model", "mini-resnet"}, {"width", "8"},
        {"train_subset", "2000"}, {"test_subset", "2000"},  {"seed", std::to_string(seed)},
        {"pretrain_epochs", "10"}, {"pretrain_lr", "0.05"}, {"phase_epochs", "2"},
        {"bits", "2"}};
    const auto pre = experiment::cmd_pretrain(make_config(env, with(base, {{"out", (out / "pre").string()}})), sink);
    auto quantize = [&](const std::string& strategy, const std::string& dir) {
      const auto q = experiment::cmd_quantize(
          make_config(env, with(base, {{"out", (out / dir).string()},
                                       {"strategy", strategy},
                                       {"init_checkpoint", pre.checkpoint.string()}})),
          sink);
      return q.phases.back().log.back().val_acc;
    };
    baseline.push_back(quantize("baseline", "baseline"));
    ts.push_back(quantize("ts", "ts"));
    full.push_back(quantize("pq,ts,guided", "pq_ts_guided"));
    std::cout << "  seed " << seed << ": fp32 " << fixed(pre.final_eval.top1) << ", Baseline " << fixed(baseline.back())
              << ", TS " << fixed(ts.back()) << ", PQ+TS+Guided " << fixed(full.back()) << std::endl;
  }
  const double mb = median(baseline), mt = median(ts), mf = median(full);
  Checks c;
  c.expect(mt >= mb, "TS median " + fixed(mt) + " below Baseline " + fixed(mb));
  c.expect(mf >= mb, "PQ+TS+Guided median " + fixed(mf) + " below Baseline " + fixed(mb));
  return c.outcome("2-bit medians: Baseline " + fixed(mb) + ", TS " + fixed(mt) + " (margin " + fixed(mt - mb) +
                   "), PQ+TS+Guided " + fixed(mf) + " (margin " + fixed(mf - mb) + ")");
}

Outcome two_stage_init(const Env& env) {
  std::ostringstream sink;
  const auto pre = experiment::cmd_pretrain(make_config(env, with(kSmallMnist, {{"out", (env.work / "ts_pre").string()}})), sink);
  const auto cfg = make_config(env, with(kSmallMnist, {{"out", (env.work / "ts_q").string()},
                                                       {"strategy", "pq,ts"},
                                                       {"init_checkpoint", pre.checkpoint.string()}}));
  const auto q = experiment::cmd_quantize(cfg, sink);
  Checks c;
  std::string detail;
  for (std::size_t i = 0; i < q.phases.size(); ++i) {
    const auto& ph = q.phases[i].phase;
    if (ph.stage != 2) continue;
    const std::string bits = std::to_string(ph.qc.weight_bits) + "," + std::to_string(ph.qc.act_bits);
    const double oracle = experiment::cmd_eval(cfg, q.checkpoints.at(i - 1), bits, sink).result.top1;
    const double start = q.phases[i].initial_val_acc;
    c.expect(oracle == start, ph.name + ": epoch-0 " + fixed(start, 6) + " vs eval " + fixed(oracle, 6));
    detail += (detail.empty() ? "" : ", ") + ph.name + " " + fixed(start);
  }
  c.expect(c.count() == 3, "expected three stage-2 phases");
  return c.outcome("stage-2 epoch-0 accuracy equals eval of the stage-1 checkpoint: " + detail);
}

Outcome guided_decoupling(const Env& env) {
  const auto cfg = make_config(env, kSmallMnist);
  const experiment::Datasets d = experiment::load_datasets(cfg);
  const nn::ModelSpec spec = experiment::experiment_spec(cfg, d.train);
  nn::Model<float> base(spec, {}, cfg.seed);
  {
    std::mt19937_64 rng(1);
    auto ctx = context(d, cfg, rng);
    strategies::train_model(base, "pre", cfg.pretrain, ctx);
  }
  strategies::TrainSchedule sched = cfg.phase;
  sched.epochs = 2;
  auto copy = [&](const quant::QuantConfig& qc) {
    auto m = std::make_unique<nn::Model<float>>(spec, qc, cfg.seed);
    m->load_state_from(base);
    return m;
  };
  const quant::QuantConfig low_qc{2, 2};
  Checks c;

  auto low = copy(low_qc), full = copy({});
  std::vector<std::uint64_t> guided_traj, solo_traj;
  {
    std::mt19937_64 rng(7);
    auto ctx = context(d, cfg, rng);
    strategies::TrainHooks hooks{[&](const EpochRecord&) { guided_traj.push_back(full->state_hash()); }};
    strategies::train_guided(*low, *full, {0.0, true}, "g", sched, ctx, hooks);
  }
  auto solo = copy({});
  {
    std::mt19937_64 rng(7);
    auto ctx = context(d, cfg, rng);
    strategies::TrainHooks hooks{[&](const EpochRecord&) { solo_traj.push_back(solo->state_hash()); }};
    strategies::train_model(*solo, "s", sched, ctx, hooks);
  }
  c.expect(guided_traj == solo_traj && guided_traj.size() == 2, "lambda=0 joint twin trajectory equals solo fine-tuning");
  c.expect(full->state_hash() != base.state_hash(), "joint twin actually trained");

  auto low2 = copy(low_qc), frozen = copy({});
  const auto before = frozen->state_hash();
  {
    std::mt19937_64 rng(7);
    auto ctx = context(d, cfg, rng);
    strategies::train_guided(*low2, *frozen, {1.0, false}, "g", sched, ctx);
  }
  c.expect(frozen->state_hash() == before, "joint=false twin bit-identical before and after");
  c.expect(low2->state_hash() != low->state_hash(), "guidance changed the low-precision trajectory");
  return c.outcome("2 epochs each; twin hashes " + std::to_string(guided_traj.size()) + "/" +
                   std::to_string(solo_traj.size()) + " epochs equal to solo, frozen twin unchanged");
}

Outcome persistence(const Env& env) {
  std::ostringstream sink;
  Checks c;
  const fs::path w = env.work / "persist";
  auto cfg_at = [&](const std::string& out, std::map<std::string, std::string> extra = {}) {
    extra["out"] = (w / out).string();
    return make_config(env, with(kSmallMnist, extra));
  };
  const auto a = experiment::cmd_pretrain(cfg_at("pre_a"), sink);
  experiment::cmd_pretrain(cfg_at("pre_b"), sink);
  c.expect(read_file(w / "pre_a" / "metrics.csv") == read_file(w / "pre_b" / "metrics.csv"), "pretrain metrics bytes");
  c.expect(read_file(w / "pre_a" / "pretrain.ckpt") == read_file(w / "pre_b" / "pretrain.ckpt"), "pretrain checkpoint bytes");

  const std::map<std::string, std::string> q{{"strategy", "pq,ts,guided"}, {"init_checkpoint", a.checkpoint.string()}};
  const auto full = experiment::cmd_quantize(cfg_at("q_a", q), sink);
  const auto again = experiment::cmd_quantize(cfg_at("q_b", q), sink);
  c.expect(full.phases.size() == 6 && full.checkpoints.size() == 6 && !full.twin_checkpoint.empty(),
           "six phase checkpoints and a twin checkpoint");
  c.expect(read_file(w / "q_a" / "metrics.csv") == read_file(w / "q_b" / "metrics.csv"), "quantize metrics bytes");
  c.expect(read_file(full.checkpoints.back()) == read_file(again.checkpoints.back()), "final checkpoint bytes");

  auto resume_q = q;
  resume_q["resume"] = full.checkpoints.at(2).string();
  const auto rest = experiment::cmd_quantize(cfg_at("q_resume", resume_q), sink);
  const auto all_rows = csv_rows(w / "q_a" / "metrics.csv");
  const auto rest_rows = csv_rows(w / "q_resume" / "metrics.csv");
  c.expect(rest.phases.size() == 3, "resume ran phases 4..6");
  c.expect(rest_rows.size() == 4 && std::equal(rest_rows.begin() + 1, rest_rows.end(), all_rows.begin() + 4),
           "resumed metrics rows equal phases 4..6");
  c.expect(read_file(rest.checkpoints.back()) == read_file(full.checkpoints.back()), "resumed final checkpoint bytes");
  c.expect(read_file(rest.twin_checkpoint) == read_file(full.twin_checkpoint), "resumed twin checkpoint bytes");

  const auto ck = experiment::Checkpoint::load(full.checkpoints.back());
  nn::Model<float> m(experiment::checkpoint_spec(ck.meta), ck.meta.qc, 123);
  ck.restore_model(m);
  experiment::Checkpoint copy = ck;
  copy.save(w / "copy.ckpt");
  c.expect(read_file(w / "copy.ckpt") == read_file(full.checkpoints.back()), "load/save round trip bytes");
  nn::Model<float> m2(experiment::checkpoint_spec(ck.meta), ck.meta.qc, 456);
  experiment::Checkpoint::load(w / "copy.ckpt").restore_model(m2);
  c.expect(m.state_hash() == m2.state_hash(), "restored state hash");
  const auto cfg = cfg_at("eval");
  const experiment::Datasets d = experiment::load_datasets(cfg);
  data::BatchStream<float> s(d.test, 256, false, {}, 0);
  auto batch = s.next();
  ad::Graph<float> g1, g2;
  c.expect(m.forward(g1, batch->images, nn::Mode::eval).logits.value() ==
               m2.forward(g2, batch->images, nn::Mode::eval).logits.value(),
           "restored forward bit-identical");
  const double eval = experiment::cmd_eval(cfg, full.checkpoints.back(), "", sink).result.top1;
  c.expect(eval == full.phases.back().log.back().val_acc, "eval equals the logged final val_acc");
  return c.outcome(std::to_string(c.count()) + " byte/bit comparisons across pretrain, quantize, resume and eval");
}

}  // namespace

std::vector<Criterion> run_criteria() {
  return {
      {4, "k=32 equivalence", k32_equivalence},
      {5, "desk-scale accuracy ladder", accuracy_ladder},
      {6, "strategy ordering", strategy_ordering},
      {7, "two-stage initialization oracle", two_stage_init},
      {8, "guided decoupling", guided_decoupling},
      {9, "persistence and determinism", persistence},
  };
}

}  // namespace qat::acceptance
