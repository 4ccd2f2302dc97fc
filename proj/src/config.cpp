#include "neld/config.hpp"

#include "neld/analysis.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

namespace neld {

const std::vector<std::pair<std::string, std::string>>& config_keys() {
  static const std::vector<std::pair<std::string, std::string>> keys = {
      {"flow.kind", "shear"},
      {"flow.rate", "1"},
      {"flow.period", "1"},
      {"sim.gamma", "1"},
      {"sim.beta", "1"},
      {"sim.steps_per_period", "32"},
      {"sim.particles", "1"},
      {"sim.seed", "0"},
      {"sim.scheme", "integrating_factor"},
      {"sim.frame", "lagrangian"},
      {"potential.kind", "zero"},
      {"potential.modes", ""},
      {"potential.amplitude", "0.5"},
      {"potential.pair.depth", "1"},
      {"potential.pair.range", "0.2"},
      {"potential.grad_bound", ""},
      {"run.periods", "100"},
      {"run.trajectories", "1"},
      {"run.stride", "1"},
      {"run.burn_in", "0.2"},
      {"run.phase_bins", "32"},
      {"run.observables", "kinetic"},
      {"run.output", "neld_out"},
      {"run.initial_momentum", ""},
      {"run.contrast_momentum", ""},
      {"verify.suite", "all"},
  };
  return keys;
}

namespace {

std::string trim(const std::string& s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string::npos) return "";
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

[[noreturn]] void bad(const std::string& key, const std::string& what) {
  throw Error(ErrorCode::Config, "config key '" + key + "': " + what);
}

double to_double(const std::string& key, const std::string& text) {
  double v = 0.0;
  const auto* end = text.data() + text.size();
  const auto [ptr, ec] = std::from_chars(text.data(), end, v);
  if (ec != std::errc() || ptr != end) bad(key, "expected a number, got '" + text + "'");
  return v;
}

template <typename Int>
Int to_int(const std::string& key, const std::string& text) {
  Int v = 0;
  const auto* end = text.data() + text.size();
  const auto [ptr, ec] = std::from_chars(text.data(), end, v);
  if (ec != std::errc() || ptr != end) bad(key, "expected an integer, got '" + text + "'");
  return v;
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, sep)) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

Vec3<double> to_vec3(const std::string& key, const std::string& text) {
  const auto parts = split(text, ',');
  if (parts.size() != 3) bad(key, "expected three comma-separated numbers");
  return {to_double(key, parts[0]), to_double(key, parts[1]), to_double(key, parts[2])};
}

// "1,0,0:0.5; 0,1,0:0.25"
std::vector<CosineMode<double>> to_modes(const std::string& key, const std::string& text) {
  std::vector<CosineMode<double>> modes;
  for (const auto& entry : split(text, ';')) {
    const auto colon = entry.find(':');
    if (colon == std::string::npos) bad(key, "mode '" + entry + "' must look like m1,m2,m3:amplitude");
    const auto idx = split(entry.substr(0, colon), ',');
    if (idx.size() != 3) bad(key, "mode '" + entry + "' needs three integer indices");
    Vec3i m(to_int<long long>(key, idx[0]), to_int<long long>(key, idx[1]), to_int<long long>(key, idx[2]));
    if (m.isZero()) bad(key, "mode indices must not all be zero");
    modes.push_back({m, to_double(key, trim(entry.substr(colon + 1)))});
  }
  return modes;
}

}  // namespace

std::map<std::string, std::string> parse_key_values(std::istream& in) {
  std::map<std::string, std::string> kv;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw Error(ErrorCode::Config, "line " + std::to_string(lineno) + ": expected key = value");
    }
    const std::string key = trim(line.substr(0, eq));
    bool known = false;
    for (const auto& [k, v] : config_keys()) known = known || k == key;
    if (!known) throw Error(ErrorCode::Config, "config key '" + key + "': unknown key");
    if (kv.count(key) != 0) bad(key, "given more than once");
    kv[key] = trim(line.substr(eq + 1));
  }
  return kv;
}

RunConfig build_config(const std::map<std::string, std::string>& kv) {
  auto get = [&](const std::string& key) {
    const auto it = kv.find(key);
    if (it != kv.end()) return it->second;
    for (const auto& [k, v] : config_keys()) {
      if (k == key) return v;
    }
    bad(key, "not a documented key");
  };

  const std::string kind = get("flow.kind");
  Flow flow;
  if (kind == "none") {
    const double period = to_double("flow.period", get("flow.period"));
    if (!(period > 0.0) || !std::isfinite(period)) bad("flow.period", "must be positive");
    flow = make_quiescent(period);
  } else if (kind == "shear" || kind == "pef") {
    const double rate = to_double("flow.rate", get("flow.rate"));
    try {
      flow = make_flow(kind == "shear" ? FlowKind::Shear : FlowKind::PlanarElongation, rate);
    } catch (const Error& e) {
      if (e.code() != ErrorCode::ZeroRate) throw;
      throw Error(ErrorCode::ZeroRate,
                  "config key 'flow.rate': the flow rate must be nonzero and finite (zero-rate rule)");
    }
  } else {
    bad("flow.kind", "expected shear, pef or none, got '" + kind + "'");
  }

  SimParams params;
  params.gamma = to_double("sim.gamma", get("sim.gamma"));
  if (!(params.gamma > 0.0) || !std::isfinite(params.gamma)) bad("sim.gamma", "must be positive");
  params.beta = to_double("sim.beta", get("sim.beta"));
  if (!(params.beta > 0.0) || !std::isfinite(params.beta)) bad("sim.beta", "must be positive");
  params.steps_per_period = to_int<int>("sim.steps_per_period", get("sim.steps_per_period"));
  if (params.steps_per_period < 1) bad("sim.steps_per_period", "must be >= 1");
  params.particles = to_int<long long>("sim.particles", get("sim.particles"));
  if (params.particles < 1) bad("sim.particles", "must be >= 1");
  params.seed = to_int<std::uint64_t>("sim.seed", get("sim.seed"));
  const std::string scheme = get("sim.scheme");
  if (scheme == "integrating_factor") {
    params.scheme = Scheme::IntegratingFactor;
  } else if (scheme == "euler_maruyama") {
    params.scheme = Scheme::EulerMaruyama;
  } else {
    bad("sim.scheme", "expected integrating_factor or euler_maruyama");
  }
  const std::string frame = get("sim.frame");
  if (frame == "lagrangian") {
    params.frame = Coords::RemappedLagrangian;
  } else if (frame == "eulerian") {
    params.frame = Coords::RemappedEulerian;
  } else {
    bad("sim.frame", "expected lagrangian or eulerian");
  }

  const Cell L0 = canonical_cell(flow);
  const std::string pkind = get("potential.kind");
  const std::string bound_text = get("potential.grad_bound");
  Potential potential;
  if (pkind == "zero") {
    potential = zero_potential<double>();
  } else if (pkind == "cosine") {
    std::vector<CosineMode<double>> modes = to_modes("potential.modes", get("potential.modes"));
    if (modes.empty()) {
      potential = axis_cosine_potential(flow, L0, to_double("potential.amplitude", get("potential.amplitude")));
    } else {
      const double bound = cosine_grad_bound(modes, flow, L0);
      potential = cosine_potential(std::move(modes), bound);
    }
  } else if (pkind == "pair") {
    const double depth = to_double("potential.pair.depth", get("potential.pair.depth"));
    const double range = to_double("potential.pair.range", get("potential.pair.range"));
    if (!(range > 0.0) || !std::isfinite(range)) bad("potential.pair.range", "must be positive");
    if (!std::isfinite(depth)) bad("potential.pair.depth", "must be finite");
    potential = smooth_pair_potential(depth, range, params.particles);
  } else {
    bad("potential.kind", "expected zero, cosine or pair, got '" + pkind + "'");
  }
  if (!bound_text.empty()) {
    potential.grad_bound = to_double("potential.grad_bound", bound_text);
    if (!(potential.grad_bound > 0.0)) bad("potential.grad_bound", "must be positive");
  }

  RunConfig rc;
  try {
    rc.sim = make_config(flow, potential, params, L0);
  } catch (const Error& e) {
    if (e.code() == ErrorCode::CutoffViolation) bad("potential.pair.range", e.what());
    throw;
  }
  rc.n_periods = to_int<long long>("run.periods", get("run.periods"));
  if (rc.n_periods < 0) bad("run.periods", "must be >= 0");
  const long long traj = to_int<long long>("run.trajectories", get("run.trajectories"));
  if (traj < 1 || traj > (1LL << 31)) bad("run.trajectories", "must be between 1 and 2^31");
  rc.n_trajectories = static_cast<std::uint32_t>(traj);
  rc.stride = to_int<int>("run.stride", get("run.stride"));
  if (rc.stride < 1 || params.steps_per_period % rc.stride != 0) {
    bad("run.stride", "must be >= 1 and divide sim.steps_per_period");
  }
  rc.burn_in = to_double("run.burn_in", get("run.burn_in"));
  if (!(rc.burn_in >= 0.0 && rc.burn_in < 1.0)) bad("run.burn_in", "must be in [0, 1)");
  rc.phase_bins = to_int<int>("run.phase_bins", get("run.phase_bins"));
  if (rc.phase_bins < 1) bad("run.phase_bins", "must be >= 1");
  rc.observables = split(get("run.observables"), ',');
  if (rc.observables.empty()) bad("run.observables", "needs at least one observable");
  for (const auto& name : rc.observables) {
    try {
      (void)find_observable(name);
    } catch (const Error&) {
      bad("run.observables", "unknown observable '" + name + "'");
    }
  }
  rc.output = get("run.output");
  if (const std::string m = get("run.initial_momentum"); !m.empty()) {
    rc.initial_momentum = to_vec3("run.initial_momentum", m);
  }
  if (const std::string m = get("run.contrast_momentum"); !m.empty()) {
    rc.contrast_momentum = to_vec3("run.contrast_momentum", m);
  }
  rc.suite = get("verify.suite");
  return rc;
}

RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::Config, "cannot open config file '" + path + "'");
  return build_config(parse_key_values(in));
}

}  // namespace neld
