// SPDX-License-Identifier: Apache-2.0
#include <algorithm>
#include <chrono>
#include <cstdlib>
#include <iostream>
#include <set>

#include "CLI11.hpp"
#include "criteria.hpp"
#include "fixtures.hpp"
#include "qat/error.hpp"

int main(int argc, char** argv) {
  using namespace qat::acceptance;
  CLI::App app{"Acceptance criteria; prints one PASS/FAIL line per criterion"};
  std::vector<int> selected;
  Env env;
  if (const char* d = std::getenv("QAT_DATA_DIR")) env.data_root = d;
  std::string data_root = env.data_root.string();
  app.add_option("-c,--criterion", selected, "Criterion number (repeatable; all when omitted)");
  app.add_option("--data-dir", data_root, "Dataset root holding mnist/ and cifar-10-batches-bin/");
  app.add_option("--seeds", env.seeds, "Seeds of the multi-seed runs");
  CLI11_PARSE(app, argc, argv);
  env.data_root = data_root;

  std::vector<Criterion> all = property_criteria();
  for (auto& c : run_criteria()) all.push_back(std::move(c));
  std::sort(all.begin(), all.end(), [](const auto& a, const auto& b) { return a.id < b.id; });
  const std::set<int> want(selected.begin(), selected.end());

  qat::testing::TempDir work("acceptance");
  env.work = work.path();
  bool ok = true;
  for (const auto& c : all) {
    if (!want.empty() && !want.count(c.id)) continue;
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run(env);
    } catch (const std::exception& e) {
      o = {false, std::string("error: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    std::cout << (o.pass ? "PASS" : "FAIL") << " [" << c.id << "] " << c.title << ": " << o.detail << " ("
              << fixed(secs, 1) << " s)" << std::endl;
    ok = ok && o.pass;
  }
  return ok ? 0 : 1;
}
