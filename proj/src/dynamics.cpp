#include "neld/dynamics.hpp"

#include <atomic>
#include <cmath>
#include <algorithm>
#include <exception>
#include <string>
#include <thread>

namespace neld {

namespace {

void require_finite(const State& s, const char* where) {
  if (!s.q.allFinite() || !s.p.allFinite()) {
    throw Error(ErrorCode::NonFinite, std::string(where) + " produced a non-finite state");
  }
}

// (1 - exp(-x)) / x, stable for small x.
double one_minus_exp_over(double x) { return x == 0.0 ? 1.0 : -std::expm1(-x) / x; }

}  // namespace

SimConfig make_config(const Flow& flow, const Potential& potential, const SimParams& params,
                      std::optional<Cell> L0) {
  if (!(params.gamma > 0.0) || !std::isfinite(params.gamma)) {
    throw Error(ErrorCode::Config, "sim.gamma must be positive");
  }
  if (!(params.beta > 0.0) || !std::isfinite(params.beta)) {
    throw Error(ErrorCode::Config, "sim.beta must be positive");
  }
  if (params.steps_per_period < 1) throw Error(ErrorCode::Config, "sim.steps_per_period must be >= 1");
  if (params.particles < 1) throw Error(ErrorCode::Config, "sim.particles must be >= 1");
  if (params.frame != Coords::RemappedLagrangian && params.frame != Coords::RemappedEulerian) {
    throw Error(ErrorCode::Config, "sim.frame must be a remapped frame");
  }
  validate(potential);

  SimConfig cfg;
  cfg.gamma = params.gamma;
  cfg.beta = params.beta;
  cfg.sigma = std::sqrt(2.0 * params.gamma / params.beta);
  cfg.steps_per_period = params.steps_per_period;
  cfg.dt = flow.period / params.steps_per_period;
  cfg.particles = params.particles;
  cfg.potential = potential;
  cfg.flow = flow;
  cfg.L0 = L0.value_or(canonical_cell(flow));
  cfg.seed = params.seed;
  cfg.scheme = params.scheme;
  cfg.frame = params.frame;
  (void)period_automorphism(cfg.flow, cfg.L0);
  check_pair_cutoff(cfg.potential, cfg.flow, cfg.L0);
  return cfg;
}

LinearFlowIntegrals linear_flow_integrals(const Flow& flow, double gamma, double h) {
  const double a1 = h * one_minus_exp_over(gamma * h);  // int_0^h exp(-gamma s) ds
  LinearFlowIntegrals out{Cell::Zero(), Cell::Zero()};
  switch (flow.kind) {
    case FlowKind::Quiescent:
      out.K0 = h * Cell::Identity();
      out.K1 = a1 * Cell::Identity();
      break;
    case FlowKind::Shear: {
      // int_0^h s exp(-gamma s) ds
      const double x = gamma * h;
      const double moment = x < 1e-4 ? h * h * (0.5 - x / 3.0 + x * x / 8.0)
                                      : (1.0 - std::exp(-x) * (1.0 + x)) / (gamma * gamma);
      out.K0 = h * Cell::Identity() + 0.5 * h * h * flow.A;
      out.K1 = a1 * Cell::Identity() + (h * a1 - moment) * flow.A;
      break;
    }
    case FlowKind::PlanarElongation:
      for (int i = 0; i < 3; ++i) {
        const double a = flow.A(i, i);
        out.K0(i, i) = a == 0.0 ? h : std::expm1(a * h) / a;
        out.K1(i, i) = std::exp(a * h) * h * one_minus_exp_over((a + gamma) * h);
      }
      break;
  }
  return out;
}

State step_lagrangian(const SimConfig& cfg, const State& state, double theta, const Particles3& dW) {
  detail::require(state.coords, Coords::RemappedLagrangian);
  const double h = cfg.dt;
  State next;
  next.coords = Coords::RemappedLagrangian;
  next.t = state.t + h;
  if (cfg.scheme == Scheme::EulerMaruyama) {
    const Particles3 force = lagrangian_force(cfg.potential, cfg.flow, theta, cfg.L0, state.q);
    next.q = state.q + h * state.p;
    next.p = state.p - h * force - h * (cfg.gamma * state.p + cfg.flow.A * state.p) +
             cfg.sigma * (stretch(cfg.flow, -theta) * dW);
  } else {
    // Half kick, exact step of dp = -Gamma p + sigma exp(-theta A) dW with
    // positions advanced by the mean momentum, half kick. With u = exp(Gamma
    // theta) p the middle part is du = exp(gamma theta) sigma dW, whose
    // integral over the step is Gaussian with variance
    // (exp(2 gamma (theta + h)) - exp(2 gamma theta)) / (2 gamma) sigma^2.
    const Particles3 kicked = state.p - 0.5 * h * lagrangian_force(cfg.potential, cfg.flow, theta, cfg.L0, state.q);
    const double noise_sd = std::sqrt(h * one_minus_exp_over(2.0 * cfg.gamma * h));
    const Particles3 relaxed =
        std::exp(-cfg.gamma * h) * (stretch(cfg.flow, -h) * kicked) +
        cfg.sigma * noise_sd * (stretch(cfg.flow, -(theta + h)) * (dW / std::sqrt(h)));
    next.q = state.q + 0.5 * h * (kicked + relaxed);
    next.p = relaxed - 0.5 * h * lagrangian_force(cfg.potential, cfg.flow, theta + h, cfg.L0, next.q);
  }
  require_finite(next, "step_lagrangian");
  return next;
}

State step_eulerian(const SimConfig& cfg, const State& state, double theta, const Particles3& dW) {
  detail::require(state.coords, Coords::RemappedEulerian);
  const double h = cfg.dt;
  auto grad = [&](double phase_at, const Particles3& q) {
    return gradient(cfg.potential, deformed_lattice(cfg.flow, phase_at, cfg.L0), q);
  };
  State next;
  next.coords = Coords::RemappedEulerian;
  next.t = state.t + h;
  if (cfg.scheme == Scheme::EulerMaruyama) {
    next.q = state.q + h * (state.p + cfg.flow.A * state.q);
    next.p = state.p - h * grad(theta, state.q) - h * cfg.gamma * state.p + cfg.sigma * dW;
  } else {
    // Half kick, exact flow of q' = p + A q, p' = -gamma p with the OU noise
    // added to p at its exact variance, half kick.
    const LinearFlowIntegrals k = linear_flow_integrals(cfg.flow, cfg.gamma, h);
    const Particles3 kicked = state.p - 0.5 * h * grad(theta, state.q);
    const double noise_sd = std::sqrt(h * one_minus_exp_over(2.0 * cfg.gamma * h));
    next.q = stretch(cfg.flow, h) * state.q + k.K1 * kicked;
    const Particles3 relaxed = std::exp(-cfg.gamma * h) * kicked + cfg.sigma * noise_sd * (dW / std::sqrt(h));
    next.p = relaxed - 0.5 * h * grad(theta + h, next.q);
  }
  require_finite(next, "step_eulerian");
  return next;
}

State remap_at_boundary(const SimConfig& cfg, const State& state) {
  const Mat3i fold = unimodular_inverse(period_automorphism(cfg.flow, cfg.L0));
  const Cell L0_inv = cfg.L0.inverse();
  State next = state;
  if (state.coords == Coords::RemappedLagrangian) {
    // g_bar at the boundary: wrap of L0^{-1} exp(TA) q = M_eff^{-1} L0^{-1} q.
    const Particles3 frac = fold.cast<double>() * (L0_inv * state.q);
    for (Eigen::Index i = 0; i < frac.cols(); ++i) next.q.col(i) = cfg.L0 * wrap_unit(frac.col(i));
    next.p = stretch(cfg.flow, cfg.flow.period) * state.p;
  } else {
    detail::require(state.coords, Coords::RemappedEulerian);
    const Particles3 frac = L0_inv * state.q;
    for (Eigen::Index i = 0; i < frac.cols(); ++i) next.q.col(i) = cfg.L0 * wrap_unit(frac.col(i));
  }
  return next;
}

Particles3 brownian_increments(const SimConfig& cfg, std::uint32_t trajectory, std::uint64_t step) {
  Particles3 dW(3, cfg.particles);
  CounterRng rng(cfg.seed, trajectory);
  rng.normals(step, std::span<double>(dW.data(), static_cast<std::size_t>(dW.size())));
  return dW * std::sqrt(cfg.dt);
}

State initial_state(const SimConfig& cfg, std::uint32_t trajectory) {
  const auto n = static_cast<std::size_t>(3 * cfg.particles);
  std::vector<double> draws(2 * n);
  CounterRng rng(cfg.seed, trajectory);
  rng.uniforms(CounterRng::kInitStep, draws);
  State s;
  s.coords = cfg.frame;
  s.q.resize(3, cfg.particles);
  s.p.resize(3, cfg.particles);
  Eigen::Map<const Particles3> frac(draws.data(), 3, cfg.particles);
  s.q = cfg.L0 * frac;
  // Momenta use normals from a disjoint block range of the init step.
  std::vector<double> normals(n + 2 * n);
  rng.normals(CounterRng::kInitStep, normals);
  const double sd = 1.0 / std::sqrt(cfg.beta);
  for (std::size_t i = 0; i < n; ++i) s.p.data()[i] = sd * normals[2 * n + i];
  return s;
}

State as_lagrangian(const SimConfig& cfg, const State& state, double theta) {
  if (state.coords == Coords::RemappedLagrangian) return state;
  detail::require(state.coords, Coords::RemappedEulerian);
  const Cell back = stretch(cfg.flow, -theta);
  State out = state;
  out.coords = Coords::RemappedLagrangian;
  out.q = back * state.q;
  out.p = back * state.p;
  return out;
}

std::pair<State, ChainSample> advance_period(const SimConfig& cfg, const State& state, long long k,
                                             std::uint32_t trajectory, int stride,
                                             std::vector<TraceRecord>* trace) {
  const int n = cfg.steps_per_period;
  const double T = cfg.flow.period;
  State s = state;
  LatticeFrame<double> frame = make_frame(cfg.flow, cfg.L0, 0.0, k);
  for (int j = 0; j < n; ++j) {
    const double theta = T * j / n;
    if (trace != nullptr && stride > 0 && j % stride == 0) {
      const State lag = as_lagrangian(cfg, s, theta);
      trace->push_back({k, j, theta, lag.q, lag.p});
    }
    const std::uint64_t step = static_cast<std::uint64_t>(k) * static_cast<std::uint64_t>(n) + j;
    const Particles3 dW = brownian_increments(cfg, trajectory, step);
    try {
      s = cfg.frame == Coords::RemappedLagrangian ? step_lagrangian(cfg, s, theta, dW)
                                                  : step_eulerian(cfg, s, theta, dW);
    } catch (const Error& e) {
      if (e.code() != ErrorCode::NonFinite) throw;
      throw Error(ErrorCode::NonFinite, "trajectory " + std::to_string(trajectory) + ", step " +
                                            std::to_string(step) + " (period " + std::to_string(k) +
                                            "): numerical blowup");
    }
  }
  frame = advance_frame(cfg.flow, frame, T);
  frame = remap_lattice(cfg.flow, frame);
  s = remap_at_boundary(cfg, s);
  s.t = static_cast<double>(k + 1) * T;
  ChainSample sample{k + 1, s.q, s.p};
  return {s, sample};
}

RunResult run(const SimConfig& cfg, long long n_periods, const State& initial, std::uint32_t trajectory,
              int stride) {
  if (initial.coords != cfg.frame) {
    throw Error(ErrorCode::WrongFrame, "initial state must be in the configured frame");
  }
  RunResult result;
  // At phase 0 both remapped frames coincide.
  result.chain.push_back({0, initial.q, initial.p});
  State s = initial;
  for (long long k = 0; k < n_periods; ++k) {
    auto [next, sample] = advance_period(cfg, s, k, trajectory, stride, stride > 0 ? &result.trace : nullptr);
    s = std::move(next);
    result.chain.push_back(std::move(sample));
  }
  return result;
}

std::vector<RunResult> run_ensemble(const SimConfig& cfg, long long n_periods, std::uint32_t n_trajectories,
                                    const InitialCondition& init, int stride, unsigned threads,
                                    std::uint32_t first_trajectory) {
  std::vector<RunResult> results(n_trajectories);
  std::vector<std::exception_ptr> errors(n_trajectories);
  std::atomic<std::uint32_t> next{0};
  auto worker = [&] {
    for (std::uint32_t i = next++; i < n_trajectories; i = next++) {
      const std::uint32_t id = first_trajectory + i;
      try {
        results[i] = run(cfg, n_periods, init(id), id, stride);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  threads = std::max(1u, std::min(threads, n_trajectories));
  if (threads == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (unsigned t = 0; t < threads; ++t) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  return results;
}

}  // namespace neld
