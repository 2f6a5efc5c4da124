// SPDX-License-Identifier: Apache-2.0
#include "qat/strategies/schedule.hpp"

#include <cmath>
#include <sstream>

#include "qat/error.hpp"
#include "qat/quant/quantizer.hpp"

namespace qat::strategies {

void BitSchedule::validate() const {
  if (bits.size() < 2) throw ConfigError("bit schedule needs at least two entries: " + to_string());
  if (bits.front() != quant::kFullPrecision) {
    throw ConfigError("bit schedule must start at 32: " + to_string());
  }
  for (std::size_t i = 1; i < bits.size(); ++i) {
    if (bits[i] < 1) throw ConfigError("bit schedule entries must be >= 1: " + to_string());
    if (bits[i] >= bits[i - 1]) {
      throw ConfigError("bit schedule must be strictly decreasing: " + to_string());
    }
  }
}

std::string BitSchedule::to_string() const {
  std::string s;
  for (std::size_t i = 0; i < bits.size(); ++i) {
    if (i) s += ',';
    s += std::to_string(bits[i]);
  }
  return s;
}

BitSchedule BitSchedule::parse(const std::string& text) {
  BitSchedule s;
  std::stringstream in(text);
  std::string item;
  while (std::getline(in, item, ',')) {
    try {
      std::size_t used = 0;
      const int v = std::stoi(item, &used);
      if (used != item.size()) throw std::invalid_argument(item);
      s.bits.push_back(v);
    } catch (const std::exception&) {
      throw ConfigError("bad bit schedule '" + text + "'");
    }
  }
  return s;
}

double LrSchedule::at(int epoch) const {
  if (epoch < 0) throw ConfigError("negative epoch");
  return initial * std::pow(factor, epoch / period);
}

void TrainSchedule::validate() const {
  if (epochs < 0) throw ConfigError("epochs must be >= 0");
  if (batch_size == 0) throw ConfigError("batch size must be positive");
  if (!(lr.initial > 0.0)) throw ConfigError("learning rate must be positive");
  if (!(lr.factor > 0.0)) throw ConfigError("learning-rate decay factor must be positive");
  if (lr.period <= 0) throw ConfigError("learning-rate decay period must be positive");
  if (sgd.momentum < 0.0 || sgd.weight_decay < 0.0) {
    throw ConfigError("momentum and weight decay must be nonnegative");
  }
}

void GuidedConfig::validate() const {
  if (!(lambda >= 0.0) || !std::isfinite(lambda)) throw ConfigError("lambda must be a finite value >= 0");
}

}  // namespace qat::strategies
