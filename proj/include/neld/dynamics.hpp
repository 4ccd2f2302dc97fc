#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <vector>

#include "neld/flow_lattice.hpp"
#include "neld/potential.hpp"
#include "neld/remap.hpp"
#include "neld/rng.hpp"

namespace neld {

using Particles3 = Particles<double>;
using State = SystemState<double>;
using Flow = FlowSpec<double>;
using Potential = PotentialSpec<double>;
using Cell = Mat3<double>;

enum class Scheme { EulerMaruyama, IntegratingFactor };

struct SimConfig {
  double gamma = 1.0;
  double beta = 1.0;
  double sigma = 1.0;  // sqrt(2 gamma / beta), derived
  double dt = 1.0;     // period / steps_per_period, derived
  int steps_per_period = 1;
  Eigen::Index particles = 1;
  Potential potential;
  Flow flow;
  Cell L0 = Cell::Identity();
  std::uint64_t seed = 0;
  Scheme scheme = Scheme::IntegratingFactor;
  Coords frame = Coords::RemappedLagrangian;
};

struct SimParams {
  double gamma = 1.0;
  double beta = 1.0;
  int steps_per_period = 32;
  Eigen::Index particles = 1;
  std::uint64_t seed = 0;
  Scheme scheme = Scheme::IntegratingFactor;
  Coords frame = Coords::RemappedLagrangian;
};

/// Validates the parameters and derives sigma and dt. L0 defaults to the
/// canonical cell of the flow.
SimConfig make_config(const Flow& flow, const Potential& potential, const SimParams& params,
                      std::optional<Cell> L0 = std::nullopt);

/// (Q_k, P_k): remapped Lagrangian coordinates at phase 0 of period k.
struct ChainSample {
  long long k = 0;
  Particles3 Q;
  Particles3 P;
};

/// One recorded point of a trajectory, always in remapped Lagrangian coordinates.
struct TraceRecord {
  long long period = 0;
  int step = 0;
  double theta = 0.0;
  Particles3 q;
  Particles3 p;
};

struct RunResult {
  std::vector<ChainSample> chain;
  std::vector<TraceRecord> trace;
};

/// One step of the remapped-Lagrangian SDE from phase theta; dW ~ N(0, dt).
State step_lagrangian(const SimConfig& cfg, const State& state, double theta, const Particles3& dW);

/// One step of the remapped-Eulerian SDE (same coefficients as absolute NELD).
State step_eulerian(const SimConfig& cfg, const State& state, double theta, const Particles3& dW);

/// Period-boundary fold: lattice remap, position wrap into L0 and, in the
/// Lagrangian frame, p -> exp(TA) p. Input is at theta = T.
State remap_at_boundary(const SimConfig& cfg, const State& state);

/// exp-integrals of the linear Eulerian drift over one step:
/// K0 = int_0^h exp((h-s)A) ds, K1 = int_0^h exp((h-s)A) exp(-gamma s) ds.
struct LinearFlowIntegrals {
  Cell K0;
  Cell K1;
};
LinearFlowIntegrals linear_flow_integrals(const Flow& flow, double gamma, double h);

/// Brownian increments for step `step` of `trajectory`.
Particles3 brownian_increments(const SimConfig& cfg, std::uint32_t trajectory, std::uint64_t step);

/// Positions uniform in the cell, momenta ~ N(0, 1/beta), at t = 0.
State initial_state(const SimConfig& cfg, std::uint32_t trajectory);

/// Integrates period k from phase 0 and folds at the boundary. Records trace
/// points every `stride` steps when trace is non-null.
std::pair<State, ChainSample> advance_period(const SimConfig& cfg, const State& state, long long k,
                                             std::uint32_t trajectory, int stride = 0,
                                             std::vector<TraceRecord>* trace = nullptr);

/// Runs n_periods from `initial` (phase 0, in cfg.frame). chain[0] is the
/// initial sample.
RunResult run(const SimConfig& cfg, long long n_periods, const State& initial, std::uint32_t trajectory,
              int stride = 0);

using InitialCondition = std::function<State(std::uint32_t trajectory)>;

/// Independent trajectories 0..n-1 with per-trajectory RNG streams; output is
/// ordered by trajectory id regardless of thread count.
std::vector<RunResult> run_ensemble(const SimConfig& cfg, long long n_periods, std::uint32_t n_trajectories,
                                    const InitialCondition& init, int stride = 0, unsigned threads = 1,
                                    std::uint32_t first_trajectory = 0);

/// Converts a state in cfg.frame at phase theta to remapped Lagrangian coordinates.
State as_lagrangian(const SimConfig& cfg, const State& state, double theta);

}  // namespace neld
