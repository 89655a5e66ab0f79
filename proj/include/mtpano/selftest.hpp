#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace mtpano {

struct SuiteResult {
  std::string name;
  bool passed = false;
  std::string detail;
  double seconds = 0;
};

/// Property suites over every module, small enough to run in a few seconds.
std::vector<SuiteResult> run_selftest(std::uint64_t seed = 0, int jobs = 1);

std::string selftest_json(const std::vector<SuiteResult>& results, int indent = 2);

}  // namespace mtpano
