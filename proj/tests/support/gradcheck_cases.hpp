// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <functional>
#include <string>
#include <vector>

#include "gradcheck.hpp"

namespace qat::testing {

/// One differentiable op or model family; `run(i)` draws and checks the
/// i-th random instance.
struct GradCase {
  std::string name;
  std::function<GradCheck(int instance)> run;
};

inline constexpr int kGradInstances = 20;

const std::vector<GradCase>& gradcheck_cases();

}  // namespace qat::testing
