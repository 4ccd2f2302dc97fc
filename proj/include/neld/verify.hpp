#pragma once

#include <string>
#include <vector>

namespace neld {

struct CheckResult {
  std::string suite;
  std::string name;
  double value = 0.0;
  double threshold = 0.0;
  bool pass = false;
};

/// remap, lattice, potential, ou, drift, convergence.
const std::vector<std::string>& suite_names();

/// Runs one suite, or every suite for "all". Unknown names throw
/// ErrorCode::Config.
std::vector<CheckResult> run_suite(const std::string& suite, unsigned threads = 1);

}  // namespace neld
