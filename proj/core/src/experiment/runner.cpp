// SPDX-License-Identifier: Apache-2.0
#include "qat/experiment/runner.hpp"

#include <cstdio>
#include <random>
#include <sstream>

#include "json.hpp"
#include "qat/data/loaders.hpp"
#include "qat/error.hpp"
#include "qat/experiment/metrics.hpp"
#include "qat/io.hpp"
#include "qat/nn/zoo.hpp"

namespace qat::experiment {

namespace fs = std::filesystem;
using strategies::EpochRecord;

namespace {

constexpr std::uint64_t kDataSeedMix = 0x9E3779B97F4A7C15ULL;

std::string rng_text(const std::mt19937_64& rng) {
  std::ostringstream o;
  o << rng;
  return o.str();
}

void rng_restore(std::mt19937_64& rng, const std::string& text) {
  std::istringstream in(text);
  in >> rng;
  if (!in) throw CheckpointError("checkpoint holds an unreadable RNG state");
}

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

void log_epoch(std::ostream& log, const EpochRecord& r) {
  log << r.phase << " epoch " << r.epoch << " lr " << fmt("%.3g", r.lr) << " loss "
      << fmt("%.4f", r.train_loss) << " train_acc " << fmt("%.4f", r.train_acc) << " val_acc "
      << fmt("%.4f", r.val_acc);
  if (r.guidance_loss) log << " guidance " << fmt("%.5f", *r.guidance_loss);
  log << '\n' << std::flush;
}

CheckpointMeta make_meta(const ExperimentConfig& cfg, const nn::ModelSpec& spec,
                         const quant::QuantConfig& qc) {
  CheckpointMeta m;
  m.dataset = cfg.dataset;
  m.model = cfg.model;
  m.width = cfg.width;
  m.input = spec.input;
  m.classes = spec.classes;
  m.spec_hash = spec.hash();
  m.qc = qc;
  return m;
}

void store_mean(Checkpoint& ck, const data::Dataset& train) {
  ck.blobs["data/mean"] = Blob::from(ad::Tensor<double>(train.image_shape, train.mean));
}

strategies::TrainContext make_context(const ExperimentConfig& cfg, const Datasets& d, std::mt19937_64& rng) {
  strategies::TrainContext ctx;
  ctx.train = &d.train;
  ctx.val = &d.test;
  ctx.augment = cfg.augment;
  ctx.prefetch = cfg.prefetch;
  ctx.eval_batch = cfg.eval_batch_size;
  ctx.rng = &rng;
  ctx.deterministic = cfg.deterministic;
  return ctx;
}

void write_config(const ExperimentConfig& cfg) { write_file_atomic(cfg.out / "config.txt", cfg.to_text()); }

nlohmann::json record_json(const EpochRecord& r) {
  nlohmann::json j{{"epoch", r.epoch}, {"lr", r.lr}, {"train_loss", r.train_loss},
                   {"train_acc", r.train_acc}, {"val_acc", r.val_acc}};
  if (r.guidance_loss) j["guidance_loss"] = *r.guidance_loss;
  return j;
}

std::string hex(std::uint64_t v) {
  char buf[24];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

}  // namespace

Datasets load_datasets(const ExperimentConfig& cfg) {
  if (cfg.data_dir.empty()) {
    throw DatasetMissingError("no dataset directory: pass --data-dir or set QAT_DATA_DIR");
  }
  auto [train, test] = cfg.dataset == "mnist" ? data::load_mnist(cfg.data_dir) : data::load_cifar10(cfg.data_dir);
  Datasets d{train.head(cfg.train_subset), test.head(cfg.test_subset)};
  data::attach_mean(d.train, d.test);
  return d;
}

nn::ModelSpec experiment_spec(const ExperimentConfig& cfg, const data::Dataset& train) {
  return nn::model_by_name(cfg.model, train.image_shape, train.classes, cfg.width);
}

nn::ModelSpec checkpoint_spec(const CheckpointMeta& meta) {
  nn::ModelSpec spec = nn::model_by_name(meta.model, meta.input, meta.classes, meta.width);
  if (spec.hash() != meta.spec_hash) {
    throw CheckpointError("checkpoint architecture hash does not match model '" + meta.model + "'");
  }
  return spec;
}

quant::QuantConfig parse_bits_override(const std::string& text, quant::QuantConfig base) {
  const auto comma = text.find(',');
  try {
    std::size_t used = 0;
    const std::string w = text.substr(0, comma);
    base.weight_bits = std::stoi(w, &used);
    if (used != w.size()) throw std::invalid_argument(text);
    base.act_bits = base.weight_bits;
    if (comma != std::string::npos) {
      const std::string a = text.substr(comma + 1);
      base.act_bits = std::stoi(a, &used);
      if (used != a.size()) throw std::invalid_argument(text);
    }
  } catch (const std::exception&) {
    throw ConfigError("bits override must be 'W' or 'W,A', got '" + text + "'");
  }
  base.validate();
  return base;
}

PretrainResult cmd_pretrain(const ExperimentConfig& cfg, std::ostream& log) {
  Datasets d = load_datasets(cfg);
  const nn::ModelSpec spec = experiment_spec(cfg, d.train);
  nn::Model<float> model(spec, quant::QuantConfig{}, cfg.seed);
  std::mt19937_64 rng(cfg.seed ^ kDataSeedMix);
  strategies::TrainContext ctx = make_context(cfg, d, rng);
  write_config(cfg);

  PretrainResult result;
  ad::Sgd<float> opt(model.parameters(), cfg.pretrain.sgd);
  strategies::TrainHooks hooks;
  hooks.on_epoch = [&](const EpochRecord& r) {
    result.log.push_back(r);
    write_metrics(cfg.out / "metrics.csv", result.log);
    log_epoch(log, r);
  };
  strategies::train_model(model, "pretrain", cfg.pretrain, ctx, hooks, &opt);
  result.final_eval = strategies::evaluate(model, d.test, cfg.eval_batch_size);

  Checkpoint ck;
  ck.meta = make_meta(cfg, spec, model.quant_config());
  ck.meta.phase_name = "pretrain";
  ck.meta.rng_state = rng_text(rng);
  ck.store_model(model);
  store_mean(ck, d.train);
  const auto params = opt.params();
  const auto momentum = opt.momentum_buffers();
  for (std::size_t i = 0; i < params.size(); ++i) {
    ck.blobs["optim/momentum/" + params[i]->name] = Blob::from(momentum[i]);
  }
  result.checkpoint = cfg.out / "pretrain.ckpt";
  ck.save(result.checkpoint);

  nlohmann::json summary{{"command", "pretrain"},
                         {"checkpoint", result.checkpoint.string()},
                         {"final_top1", result.final_eval.top1},
                         {"final_top5", result.final_eval.top5},
                         {"state_hash", hex(model.state_hash())}};
  for (const auto& r : result.log) summary["epochs"].push_back(record_json(r));
  write_file_atomic(cfg.out / "summary.json", summary.dump(2) + "\n");
  log << "pretrain done: top1 " << fmt("%.4f", result.final_eval.top1) << " checkpoint "
      << result.checkpoint.string() << '\n';
  return result;
}

QuantizeResult cmd_quantize(const ExperimentConfig& cfg, std::ostream& log) {
  if (cfg.strategies.empty()) {
    throw ConfigError("quantize needs a strategy: --strategy with a subset of ts,pq,guided (or baseline)");
  }
  const strategies::Plan plan = strategies::compose(cfg.strategies, cfg.plan_options());
  const bool resuming = !cfg.resume.empty();
  if (!resuming && cfg.init_checkpoint.empty()) {
    throw ConfigError("quantize needs --init (a pretrained checkpoint) or --resume");
  }
  const Checkpoint ck = Checkpoint::load(resuming ? cfg.resume : cfg.init_checkpoint);
  if (ck.meta.dataset != cfg.dataset || ck.meta.model != cfg.model || ck.meta.width != cfg.width) {
    throw CheckpointError("incompatible checkpoint: it holds " + ck.meta.model + " (width " +
                          std::to_string(ck.meta.width) + ") on " + ck.meta.dataset + ", config asks for " +
                          cfg.model + " (width " + std::to_string(cfg.width) + ") on " + cfg.dataset);
  }
  std::size_t first = 0;
  if (resuming) {
    first = ck.meta.phase_index;
    if (first == 0 || first > plan.phases.size() || plan.phases[first - 1].name != ck.meta.phase_name) {
      throw CheckpointError("resume checkpoint phase '" + ck.meta.phase_name + "' is not part of this plan");
    }
  }

  Datasets d = load_datasets(cfg);
  const nn::ModelSpec spec = experiment_spec(cfg, d.train);
  if (spec.hash() != ck.meta.spec_hash) {
    throw CheckpointError("incompatible checkpoint: architecture hash differs from the configured model");
  }
  nn::Model<float> model(spec, ck.meta.qc, cfg.seed);
  ck.restore_model(model);

  std::optional<nn::Model<float>> twin;
  if (plan.guided()) {
    twin.emplace(spec, quant::QuantConfig{}, cfg.seed);
    if (resuming) {
      if (!ck.has("twin/param/" + std::as_const(*twin).all_parameters().front()->name)) {
        throw CheckpointError("resume checkpoint has no guided twin state");
      }
      ck.restore_model(*twin, "twin/");
    } else {
      ck.restore_model(*twin);
    }
  }

  std::mt19937_64 rng(cfg.seed ^ kDataSeedMix);
  if (resuming) rng_restore(rng, ck.meta.rng_state);
  strategies::TrainContext ctx = make_context(cfg, d, rng);
  write_config(cfg);

  QuantizeResult result;
  std::vector<EpochRecord> records;
  strategies::PlanHooks hooks;
  hooks.train.on_epoch = [&](const EpochRecord& r) {
    records.push_back(r);
    write_metrics(cfg.out / "metrics.csv", records);
    log_epoch(log, r);
  };
  hooks.on_phase = [&](const strategies::PhaseResult& r) {
    Checkpoint out;
    out.meta = make_meta(cfg, spec, r.phase.qc);
    out.meta.phase_index = static_cast<std::uint32_t>(r.phase.index);
    out.meta.phase_name = r.phase.name;
    out.meta.rng_state = rng_text(rng);
    out.store_model(model);
    if (twin) out.store_model(*twin, "twin/");
    store_mean(out, d.train);
    const fs::path path = cfg.out / (r.phase.name + ".ckpt");
    out.save(path);
    result.checkpoints.push_back(path);
    log << r.phase.name << " done: initial val_acc " << fmt("%.4f", r.initial_val_acc) << ", checkpoint "
        << path.string() << '\n';
  };
  log << plan.describe();
  result.phases = strategies::execute_plan(model, twin ? &*twin : nullptr, plan, first, cfg.phase,
                                           cfg.guided, ctx, hooks);

  if (twin) {
    Checkpoint t;
    t.meta = make_meta(cfg, spec, twin->quant_config());
    t.meta.phase_index = static_cast<std::uint32_t>(plan.phases.size());
    t.meta.phase_name = "twin_final";
    t.meta.rng_state = rng_text(rng);
    t.store_model(*twin);
    store_mean(t, d.train);
    result.twin_checkpoint = cfg.out / "twin_final.ckpt";
    t.save(result.twin_checkpoint);
  }

  nlohmann::json summary{{"command", "quantize"}, {"strategy", cfg.strategy}, {"plan", plan.describe()}};
  summary["phases"] = nlohmann::json::array();
  for (const auto& r : result.phases) {
    nlohmann::json p{{"index", r.phase.index},
                     {"name", r.phase.name},
                     {"weight_bits", r.phase.qc.weight_bits},
                     {"act_bits", r.phase.qc.act_bits},
                     {"guided", r.phase.guided},
                     {"initial_val_acc", r.initial_val_acc},
                     {"start_hash", hex(r.start_hash)},
                     {"end_hash", hex(r.end_hash)}};
    if (r.phase.guided) p["twin_end_hash"] = hex(r.twin_end_hash);
    for (const auto& e : r.log) p["epochs"].push_back(record_json(e));
    summary["phases"].push_back(p);
  }
  if (!result.twin_checkpoint.empty()) summary["twin_checkpoint"] = result.twin_checkpoint.string();
  write_file_atomic(cfg.out / "summary.json", summary.dump(2) + "\n");
  return result;
}

EvalReport cmd_eval(const ExperimentConfig& cfg, const fs::path& checkpoint, const std::string& bits_override,
                    std::ostream& log) {
  const Checkpoint ck = Checkpoint::load(checkpoint);
  if (ck.meta.dataset != cfg.dataset) {
    throw ConfigError("checkpoint was trained on " + ck.meta.dataset + " but the config selects " + cfg.dataset);
  }
  const nn::ModelSpec spec = checkpoint_spec(ck.meta);
  quant::QuantConfig qc = ck.meta.qc;
  if (!bits_override.empty()) qc = parse_bits_override(bits_override, qc);
  nn::Model<float> model(spec, qc, 0);
  ck.restore_model(model);
  if (!ck.has("data/mean")) throw CheckpointError("checkpoint has no mean image");
  if (cfg.data_dir.empty()) {
    throw DatasetMissingError("no dataset directory: pass --data-dir or set QAT_DATA_DIR");
  }
  auto splits = cfg.dataset == "mnist" ? data::load_mnist(cfg.data_dir) : data::load_cifar10(cfg.data_dir);
  data::Dataset test = splits.second.head(cfg.test_subset);
  const ad::Tensor<double> mean = ck.blobs.at("data/mean").as<double>();
  if (mean.shape() != test.image_shape) throw CheckpointError("checkpoint mean image has the wrong shape");
  test.mean = mean.storage();

  EvalReport report;
  report.qc = qc;
  report.classes = spec.classes;
  report.result = strategies::evaluate(model, test, cfg.eval_batch_size);
  log << "top1 " << fmt("%.4f", report.result.top1);
  if (spec.classes >= 5) log << " top5 " << fmt("%.4f", report.result.top5);
  log << " (weight_bits " << qc.weight_bits << ", act_bits " << qc.act_bits << ", " << test.size()
      << " test images)\n";
  return report;
}

std::string cmd_plan(const ExperimentConfig& cfg) {
  return strategies::compose(cfg.strategies, cfg.plan_options()).describe();
}

}  // namespace qat::experiment
