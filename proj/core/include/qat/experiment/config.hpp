// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "qat/data/batches.hpp"
#include "qat/quant/quantizer.hpp"
#include "qat/strategies/plan.hpp"
#include "qat/strategies/schedule.hpp"

namespace qat::experiment {

/// Raw key/value settings. Starts from the defaults; later sources win.
class ConfigMap {
 public:
  ConfigMap();

  /// Lines "key = value"; '#' starts a comment. Unknown keys are errors.
  void merge_text(const std::string& text, const std::string& origin);
  void merge_file(const std::filesystem::path& path);
  void set(const std::string& key, const std::string& value);
  const std::string& get(const std::string& key) const;
  bool explicitly_set(const std::string& key) const { return explicit_.count(key) > 0; }

  /// Keys in their canonical order.
  static const std::vector<std::string>& keys();

 private:
  std::map<std::string, std::string> values_;
  std::map<std::string, bool> explicit_;
};

/// Fully resolved experiment settings; every "auto" is materialised.
struct ExperimentConfig {
  std::string dataset;
  std::string model;
  std::size_t width = 0;
  std::string strategy;  // as written: subset of {ts,pq,guided} or "baseline"
  strategies::StrategySet strategies;
  int bits = 0;
  strategies::BitSchedule bit_schedule;
  bool quantize_first_last = true;
  bool weight_affine_map = true;
  std::string stage1_act_bits;  // "32".."1" or "prev"
  strategies::GuidedConfig guided;
  std::uint64_t seed = 0;
  std::filesystem::path out;
  std::filesystem::path data_dir;
  std::filesystem::path init_checkpoint;
  std::filesystem::path resume;
  std::size_t train_subset = 0;
  std::size_t test_subset = 0;
  std::size_t eval_batch_size = 0;
  std::size_t prefetch = 0;
  data::AugmentConfig augment;
  strategies::TrainSchedule pretrain;
  strategies::TrainSchedule phase;
  bool deterministic = false;

  strategies::PlanOptions plan_options() const;
  /// Every key with its resolved value, one "key = value" per line.
  std::string to_text() const;
};

/// Typed view of `raw`. Throws ConfigError naming the bad key.
ExperimentConfig resolve(const ConfigMap& raw);

/// Directory holding `dataset`'s files below a dataset root: the root
/// itself if it already holds them, else the conventional subdirectory.
std::filesystem::path dataset_dir(const std::filesystem::path& root, const std::string& dataset);

}  // namespace qat::experiment
