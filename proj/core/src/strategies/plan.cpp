// SPDX-License-Identifier: Apache-2.0
#include "qat/strategies/plan.hpp"

#include <algorithm>
#include <cctype>
#include <sstream>

#include "qat/error.hpp"

namespace qat::strategies {

std::string StrategySet::to_string() const {
  std::string s;
  auto add = [&](bool on, const char* name) {
    if (!on) return;
    if (!s.empty()) s += ',';
    s += name;
  };
  add(pq, "pq");
  add(ts, "ts");
  add(guided, "guided");
  return s;
}

StrategySet StrategySet::parse(const std::string& text) {
  StrategySet set;
  std::stringstream in(text);
  std::string item;
  while (std::getline(in, item, ',')) {
    std::string name;
    for (char c : item) {
      if (!std::isspace(static_cast<unsigned char>(c))) {
        name += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
      }
    }
    if (name.empty()) continue;
    if (name == "ts") {
      set.ts = true;
    } else if (name == "pq") {
      set.pq = true;
    } else if (name == "guided") {
      set.guided = true;
    } else {
      throw ConfigError("unknown strategy '" + name + "' (expected ts, pq or guided)");
    }
  }
  return set;
}

std::string Plan::describe() const {
  std::ostringstream out;
  for (const auto& p : phases) {
    out << p.index << ' ' << p.name << " weight_bits=" << p.qc.weight_bits
        << " act_bits=" << p.qc.act_bits << " guided=" << (p.guided ? "yes" : "no") << '\n';
  }
  return out.str();
}

Plan compose(const StrategySet& strategies, const PlanOptions& options) {
  if (strategies.empty()) throw ConfigError("empty strategy set: choose from ts, pq, guided");
  options.schedule.validate();
  if (options.stage1_act_bits < 1 || options.stage1_act_bits > quant::kFullPrecision) {
    throw ConfigError("stage1_act_bits must lie in [1, 32]");
  }

  std::vector<int> rungs;
  if (strategies.pq) {
    rungs.assign(options.schedule.bits.begin() + 1, options.schedule.bits.end());
  } else {
    rungs.push_back(options.schedule.target());
  }

  Plan plan;
  plan.strategies = strategies;
  auto push = [&](int w, int a, int rung, int stage) {
    Phase p;
    p.index = plan.phases.size() + 1;
    p.qc.weight_bits = w;
    p.qc.act_bits = a;
    p.qc.quantize_first_last = options.quantize_first_last;
    p.qc.weight_affine_map = options.weight_affine_map;
    p.guided = strategies.guided;
    p.rung = rung;
    p.stage = stage;
    p.name = "p" + std::to_string(p.index) + "_w" + std::to_string(w) + "a" + std::to_string(a);
    if (stage) p.name += "_s" + std::to_string(stage);
    if (p.guided) p.name += "_g";
    plan.phases.push_back(p);
  };

  int prev = quant::kFullPrecision;
  for (int k : rungs) {
    if (strategies.ts) {
      const int a1 = options.stage1_prev ? prev : options.stage1_act_bits;
      if (a1 < k) {
        throw ConfigError("stage-1 activation bits " + std::to_string(a1) +
                          " are below the rung's " + std::to_string(k));
      }
      push(k, a1, k, 1);
      push(k, k, k, 2);
    } else {
      push(k, k, k, 0);
    }
    prev = k;
  }
  return plan;
}

}  // namespace qat::strategies
