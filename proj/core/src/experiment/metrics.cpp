// SPDX-License-Identifier: Apache-2.0
#include "qat/experiment/metrics.hpp"

#include <cstdio>

#include "qat/error.hpp"
#include "qat/io.hpp"

namespace qat::experiment {

namespace {

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.9g", v);
  return buf;
}

}  // namespace

std::string metrics_csv(const std::vector<strategies::EpochRecord>& records) {
  std::string out = std::string(kMetricsHeader) + "\n";
  for (const auto& r : records) {
    out += r.phase + "," + std::to_string(r.epoch) + "," + num(r.lr) + "," + num(r.train_loss) +
           "," + num(r.train_acc) + "," + num(r.val_acc) + "," +
           (r.guidance_loss ? num(*r.guidance_loss) : std::string()) + "," + num(r.wall_ms) + "\n";
  }
  return out;
}

void write_metrics(const std::filesystem::path& path,
                   const std::vector<strategies::EpochRecord>& records) {
  if (records.empty()) throw ConfigError("no metrics to write");
  write_file_atomic(path, metrics_csv(records));
}

}  // namespace qat::experiment
