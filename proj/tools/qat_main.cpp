// SPDX-License-Identifier: Apache-2.0
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "qat/error.hpp"
#include "qat/experiment/checkpoint.hpp"
#include "qat/experiment/config.hpp"
#include "qat/experiment/runner.hpp"

namespace {

namespace ex = qat::experiment;

struct CommonFlags {
  std::string config;
  std::string data_dir;
  std::optional<unsigned long long> seed;
  std::string out;
  bool deterministic = false;
  std::vector<std::string> sets;
};

void add_common(CLI::App* cmd, CommonFlags& f) {
  cmd->add_option("--config", f.config, "key = value config file");
  cmd->add_option("--data-dir", f.data_dir, "dataset root (default: $QAT_DATA_DIR)");
  cmd->add_option("--seed", f.seed, "experiment seed");
  cmd->add_option("--out", f.out, "output directory");
  cmd->add_flag("--deterministic", f.deterministic, "write wall_ms as 0 so reruns are byte-identical");
  cmd->add_option("--set", f.sets, "override any config key: --set key=value")->take_all();
}

ex::ConfigMap base_config(const CommonFlags& f) {
  ex::ConfigMap raw;
  if (!f.config.empty()) raw.merge_file(f.config);
  if (!f.data_dir.empty()) raw.set("data_dir", f.data_dir);
  if (f.seed) raw.set("seed", std::to_string(*f.seed));
  if (!f.out.empty()) raw.set("out", f.out);
  if (f.deterministic) raw.set("deterministic", "true");
  for (const auto& s : f.sets) {
    const auto eq = s.find('=');
    if (eq == std::string::npos) throw qat::ConfigError("--set expects key=value, got '" + s + "'");
    raw.set(s.substr(0, eq), s.substr(eq + 1));
  }
  return raw;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Low-precision CNN training: pretraining, quantized fine-tuning and evaluation"};
  app.require_subcommand(1);

  CommonFlags pre_f, quant_f, eval_f, plan_f;
  auto* pretrain = app.add_subcommand("pretrain", "train the full-precision model");
  add_common(pretrain, pre_f);

  std::string strategy, bits, lambda, init, resume;
  bool no_joint = false, keep_fp = false;
  auto* quantize = app.add_subcommand("quantize", "run a quantization plan from a pretrained checkpoint");
  add_common(quantize, quant_f);
  auto* plan = app.add_subcommand("plan", "print the expanded phase list without training");
  add_common(plan, plan_f);
  for (auto* cmd : {quantize, plan}) {
    cmd->add_option("--strategy", strategy, "subset of ts,pq,guided, or baseline");
    cmd->add_option("--bits", bits, "target bit-width");
    cmd->add_option("--lambda", lambda, "guidance loss weight");
    cmd->add_flag("--no-joint", no_joint, "freeze the full-precision twin");
    cmd->add_flag("--keep-first-last-fp", keep_fp, "leave the first conv and last fc weights unquantized");
  }
  quantize->add_option("--init", init, "pretrained checkpoint to start from");
  quantize->add_option("--resume", resume, "phase checkpoint to continue after");

  std::string checkpoint, eval_bits;
  auto* eval = app.add_subcommand("eval", "top-1/top-5 of a checkpoint on the test split");
  add_common(eval, eval_f);
  eval->add_option("--checkpoint", checkpoint, "checkpoint file")->required();
  eval->add_option("--bits", eval_bits, "re-evaluate at other bit-widths: W or W,A");

  CLI11_PARSE(app, argc, argv);

  try {
    auto quant_overrides = [&](ex::ConfigMap& raw) {
      if (!strategy.empty()) raw.set("strategy", strategy);
      if (!bits.empty()) raw.set("bits", bits);
      if (!lambda.empty()) raw.set("lambda", lambda);
      if (no_joint) raw.set("joint", "false");
      if (keep_fp) raw.set("quantize_first_last", "false");
    };
    if (pretrain->parsed()) {
      ex::cmd_pretrain(ex::resolve(base_config(pre_f)), std::cout);
    } else if (quantize->parsed()) {
      ex::ConfigMap raw = base_config(quant_f);
      quant_overrides(raw);
      if (!init.empty()) raw.set("init_checkpoint", init);
      if (!resume.empty()) raw.set("resume", resume);
      ex::cmd_quantize(ex::resolve(raw), std::cout);
    } else if (plan->parsed()) {
      ex::ConfigMap raw = base_config(plan_f);
      quant_overrides(raw);
      std::cout << ex::cmd_plan(ex::resolve(raw));
    } else if (eval->parsed()) {
      ex::ConfigMap raw = base_config(eval_f);
      const auto meta = ex::Checkpoint::load(checkpoint).meta;
      if (!raw.explicitly_set("dataset")) raw.set("dataset", meta.dataset);
      ex::cmd_eval(ex::resolve(raw), checkpoint, eval_bits, std::cout);
    }
  } catch (const qat::ConfigError& e) {
    std::cerr << "usage error: " << e.what() << '\n';
    return 2;
  } catch (const qat::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
