// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <filesystem>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "qat/data/dataset.hpp"
#include "qat/experiment/checkpoint.hpp"
#include "qat/experiment/config.hpp"
#include "qat/nn/spec.hpp"
#include "qat/strategies/runners.hpp"
#include "qat/strategies/trainer.hpp"

namespace qat::experiment {

struct Datasets {
  data::Dataset train;
  data::Dataset test;
};

/// Loads both splits, keeps the configured head subsets and attaches the
/// mean image of the (possibly reduced) train split.
Datasets load_datasets(const ExperimentConfig& cfg);

/// The architecture an experiment trains.
nn::ModelSpec experiment_spec(const ExperimentConfig& cfg, const data::Dataset& train);
/// The architecture recorded in a checkpoint.
nn::ModelSpec checkpoint_spec(const CheckpointMeta& meta);

/// Parses "W" or "W,A" (A defaults to W) on top of `base`.
quant::QuantConfig parse_bits_override(const std::string& text, quant::QuantConfig base);

struct PretrainResult {
  std::filesystem::path checkpoint;
  std::vector<strategies::EpochRecord> log;
  strategies::EvalResult final_eval;
};

struct QuantizeResult {
  std::vector<strategies::PhaseResult> phases;
  std::vector<std::filesystem::path> checkpoints;
  std::filesystem::path twin_checkpoint;  // empty unless guided
};

struct EvalReport {
  strategies::EvalResult result;
  quant::QuantConfig qc;
  std::size_t classes = 0;
};

/// Full-precision training from scratch. Writes pretrain.ckpt,
/// metrics.csv, config.txt and summary.json below cfg.out.
PretrainResult cmd_pretrain(const ExperimentConfig& cfg, std::ostream& log);

/// Runs the composed plan from cfg.init_checkpoint, or continues after the
/// phase stored in cfg.resume. Writes one checkpoint per phase.
QuantizeResult cmd_quantize(const ExperimentConfig& cfg, std::ostream& log);

/// Top-1/top-5 of a checkpoint on the test split, optionally under other
/// bit-widths ("W" or "W,A").
EvalReport cmd_eval(const ExperimentConfig& cfg, const std::filesystem::path& checkpoint,
                    const std::string& bits_override, std::ostream& log);

/// The expanded phase list, one line per phase.
std::string cmd_plan(const ExperimentConfig& cfg);

}  // namespace qat::experiment
