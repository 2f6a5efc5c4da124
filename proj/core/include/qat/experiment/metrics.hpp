// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "qat/strategies/trainer.hpp"

namespace qat::experiment {

inline constexpr const char* kMetricsHeader =
    "phase,epoch,lr,train_loss,train_acc,val_acc,guidance_loss,wall_ms";

/// Header plus one row per record. guidance_loss is empty when absent.
std::string metrics_csv(const std::vector<strategies::EpochRecord>& records);

/// Atomically (re)writes the CSV. Throws ConfigError on an empty log.
void write_metrics(const std::filesystem::path& path,
                   const std::vector<strategies::EpochRecord>& records);

}  // namespace qat::experiment
