#pragma once

#include <istream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "neld/dynamics.hpp"

namespace neld {

/// Everything a `run` needs: the simulation plus ensemble and output settings.
struct RunConfig {
  SimConfig sim;
  long long n_periods = 100;
  std::uint32_t n_trajectories = 1;
  int stride = 1;
  double burn_in = 0.2;
  int phase_bins = 32;
  std::vector<std::string> observables{"kinetic"};
  std::string output = "neld_out";
  std::string suite = "all";
  // Fixed initial momentum for every particle of ensemble A; random if unset.
  std::optional<Vec3<double>> initial_momentum;
  // When set, a second ensemble starts from this momentum and the run reports
  // the convergence rate between the two.
  std::optional<Vec3<double>> contrast_momentum;
};

/// Flat `key = value` lines; `#` starts a comment. Unknown keys are errors.
std::map<std::string, std::string> parse_key_values(std::istream& in);

/// Builds and validates a RunConfig. Errors are ErrorCode::Config (message
/// names the key) or ErrorCode::ZeroRate.
RunConfig build_config(const std::map<std::string, std::string>& kv);

RunConfig load_config(const std::string& path);

/// Documented keys with their defaults, in file order.
const std::vector<std::pair<std::string, std::string>>& config_keys();

}  // namespace neld
