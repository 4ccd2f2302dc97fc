#include <doctest.h>

#include <cmath>
#include <random>

#include "neld/analysis.hpp"

using namespace neld;

namespace {

SimConfig config(const Flow& flow, const Potential& pot, int steps, double beta = 1.0,
                 Scheme scheme = Scheme::IntegratingFactor, Coords frame = Coords::RemappedLagrangian) {
  SimParams p;
  p.beta = beta;
  p.steps_per_period = steps;
  p.scheme = scheme;
  p.frame = frame;
  p.seed = 17;
  return make_config(flow, pot, p);
}

InitialCondition start_at(const SimConfig& cfg, const Particles3& p) {
  return [cfg, p](std::uint32_t id) {
    State s = initial_state(cfg, id);
    s.p = p;
    return s;
  };
}

// f(q, p) = sin(2 pi q_x) p_y^2 + q_y p_x, with analytic derivatives.
SmoothObservable mixed_observable() {
  SmoothObservable f;
  f.name = "mixed";
  const double k = 2.0 * M_PI;
  f.value = [k](const Particles3& q, const Particles3& p) {
    return std::sin(k * q(0, 0)) * p(1, 0) * p(1, 0) + q(1, 0) * p(0, 0);
  };
  f.grad_q = [k](const Particles3& q, const Particles3& p) {
    Particles3 g = Particles3::Zero(3, 1);
    g(0, 0) = k * std::cos(k * q(0, 0)) * p(1, 0) * p(1, 0);
    g(1, 0) = p(0, 0);
    return g;
  };
  f.grad_p = [k](const Particles3& q, const Particles3& p) {
    Particles3 g = Particles3::Zero(3, 1);
    g(0, 0) = q(1, 0);
    g(1, 0) = 2.0 * std::sin(k * q(0, 0)) * p(1, 0);
    return g;
  };
  f.laplacian_p = [k](const Particles3& q, const Particles3&) { return 2.0 * std::sin(k * q(0, 0)); };
  return f;
}

// Generator from central differences of f.value only.
double generator_fd(const SimConfig& cfg, double theta, const Particles3& q, const Particles3& p,
                    const SmoothObservable& f) {
  constexpr double h = 1e-4;
  const Particles3 grad_v = gradient(cfg.potential, deformed_lattice(cfg.flow, theta, cfg.L0), q);
  const Particles3 drift_q = p + cfg.flow.A * q;
  const Particles3 drift_p = -grad_v - cfg.gamma * p;
  double out = 0.0;
  const double f0 = f.value(q, p);
  for (Eigen::Index i = 0; i < q.size(); ++i) {
    Particles3 qa = q, qb = q, pa = p, pb = p;
    qa.data()[i] += h;
    qb.data()[i] -= h;
    pa.data()[i] += h;
    pb.data()[i] -= h;
    out += drift_q.data()[i] * (f.value(qa, p) - f.value(qb, p)) / (2.0 * h);
    const double fa = f.value(q, pa), fb = f.value(q, pb);
    out += drift_p.data()[i] * (fa - fb) / (2.0 * h);
    out += 0.5 * cfg.sigma * cfg.sigma * (fa - 2.0 * f0 + fb) / (h * h);
  }
  return out;
}

}  // namespace

TEST_CASE("lyapunov functions") {
  Particles3 p(3, 1);
  p << 1.0, 2.0, 2.0;
  CHECK(lyapunov(1, p) == doctest::Approx(10.0));
  CHECK(lyapunov(2, p) == doctest::Approx(82.0));
  CHECK(lyapunov(1, Particles3::Zero(3, 2)) == 1.0);
  CHECK(lyapunov_power(1.0, p) == doctest::Approx(4.0));
}

TEST_CASE("batch means") {
  std::mt19937_64 rng(1);
  std::normal_distribution<double> n(2.0, 1.0);
  std::vector<double> x(64000);
  for (double& v : x) v = n(rng);
  const MeanSe iid = sample_mean(x), bm = batch_means(x);
  CHECK(iid.se == doctest::Approx(1.0 / std::sqrt(64000.0)).epsilon(0.02));
  CHECK(bm.mean == doctest::Approx(iid.mean));
  CHECK(bm.se == doctest::Approx(iid.se).epsilon(0.35));
  CHECK(std::abs(bm.mean - 2.0) < 4.0 * bm.se);

  // A slowly varying series gets a much larger batch-means error than the i.i.d. one.
  std::vector<double> ar(64000);
  double s = 0.0;
  for (double& v : ar) v = s = 0.99 * s + n(rng) - 2.0;
  CHECK(batch_means(ar).se > 5.0 * sample_mean(ar).se);

  const std::vector<double> flat(100, 3.0);
  CHECK(batch_means(flat).mean == 3.0);
  CHECK(batch_means(flat).se == 0.0);
}

TEST_CASE("drift fit recovers a linear drift and dominates the bins") {
  std::mt19937_64 rng(2);
  std::exponential_distribution<double> e(0.2);
  std::normal_distribution<double> n(0.0, 0.5);
  std::vector<double> x(20000), y(20000);
  for (std::size_t i = 0; i < x.size(); ++i) {
    x[i] = 1.0 + e(rng);
    y[i] = 0.5 * x[i] + 2.0 + n(rng);
  }
  const DriftFit fit = drift_fit(x, y);
  CHECK(fit.a == doctest::Approx(0.5).epsilon(0.05));
  CHECK(fit.b == doctest::Approx(2.0).epsilon(0.1));
  CHECK(fit.samples == x.size());
  // A contracting, saturating drift still has a < 1.
  for (std::size_t i = 0; i < x.size(); ++i) y[i] = 0.3 * x[i] + 4.0 * std::tanh(x[i]) + n(rng);
  CHECK(drift_fit(x, y).a < 1.0);
}

TEST_CASE("drift fit rejects too little data") {
  const std::vector<double> few(500, 1.0);
  try {
    drift_fit(few, few);
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::InsufficientData);
  }
  const std::vector<double> flat(5000, 2.0);
  CHECK_THROWS_AS(drift_fit(flat, flat), Error);
  CHECK_THROWS_AS(drift_estimate(std::vector<ChainSample>{}, 1), Error);
}

TEST_CASE("generator of constants and of the kinetic energy") {
  const Flow flow = make_flow(FlowKind::Shear, 1.0);
  const SimConfig cfg = config(flow, axis_cosine_potential(flow, canonical_cell(flow)), 8, 2.0);
  const Particles3 q = Particles3::Random(3, 1), p = Particles3::Random(3, 1);
  CHECK(generator_apply(cfg, 0.3, q, p, constant_function(4.0)) == 0.0);

  const SimConfig free = config(make_quiescent(1.0), zero_potential<double>(), 8, 2.0);
  const double expected = -2.0 * free.gamma * p.squaredNorm() + 3.0 * free.sigma * free.sigma;
  CHECK(generator_apply(free, 0.0, q, p, kinetic_power(2.0)) == doctest::Approx(expected));
}

TEST_CASE("generator matches a finite-difference oracle") {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(-1.0, 1.0), ut(0.0, 1.0);
  for (const Flow& flow : {make_flow(FlowKind::Shear, 1.0), make_flow(FlowKind::PlanarElongation, 1.0)}) {
    const SimConfig cfg = config(flow, axis_cosine_potential(flow, canonical_cell(flow)), 8, 1.5);
    for (const SmoothObservable& f : {mixed_observable(), kinetic_power(2.0), kinetic_power(4.0)}) {
      for (int i = 0; i < 50; ++i) {
        Particles3 q(3, 1), p(3, 1);
        q << u(rng), u(rng), u(rng);
        p << u(rng), u(rng), u(rng);
        const double theta = flow.period * ut(rng);
        const double exact = generator_apply(cfg, theta, q, p, f);
        CHECK(std::abs(exact - generator_fd(cfg, theta, q, p, f)) <= 1e-5 * (1.0 + std::abs(exact)));
      }
    }
  }
}

TEST_CASE("one Euler-Maruyama step is weakly consistent with the generator") {
  const Flow flow = make_flow(FlowKind::Shear, 1.0);
  const SimConfig cfg = config(flow, axis_cosine_potential(flow, canonical_cell(flow)), 1000, 1.0,
                               Scheme::EulerMaruyama, Coords::RemappedEulerian);
  const SmoothObservable f = mixed_observable();
  State s;
  s.coords = Coords::RemappedEulerian;
  s.q = Particles3(3, 1);
  s.p = Particles3(3, 1);
  s.q << 0.2, 0.4, 0.1;
  s.p << 0.7, -1.1, 0.3;
  const double theta = 0.25;
  const double f0 = f.value(s.q, s.p);
  std::vector<double> rate;
  for (std::uint64_t j = 0; j < 40000; ++j) {
    const Particles3 dw = brownian_increments(cfg, 0, j);
    const State a = step_eulerian(cfg, s, theta, dw);
    const State b = step_eulerian(cfg, s, theta, Particles3(-dw));
    rate.push_back((0.5 * (f.value(a.q, a.p) + f.value(b.q, b.p)) - f0) / cfg.dt);
  }
  const MeanSe m = sample_mean(rate);
  const double uf = generator_apply(cfg, theta, s.q, s.p, f);
  CHECK(std::abs(m.mean - uf) <= 4.0 * m.se + 0.05 * (1.0 + std::abs(uf)));
}

TEST_CASE("generator drift fit for kinetic powers") {
  for (const Flow& flow : {make_flow(FlowKind::Shear, 1.0), make_flow(FlowKind::PlanarElongation, 1.0)}) {
    const SimConfig cfg = config(flow, axis_cosine_potential(flow, canonical_cell(flow)), 8);
    for (double m : {2.0, 4.0}) {
      const GeneratorFit fit = fit_generator_drift(cfg, m);
      CHECK(fit.points == 4000);
      // |p|^m is damped at rate m gamma; the bounded force adds a term of
      // order |p|^(m-1), which lowers the tail slope at moderate |p| only.
      CHECK(fit.a_hat > 0.0);
      CHECK(fit.a_hat <= m * cfg.gamma * (1.0 + 1e-9));
      CHECK(std::isfinite(fit.b_hat));
      CHECK(fit_generator_drift(cfg, m, 4000.0).a_hat == doctest::Approx(m * cfg.gamma).epsilon(0.05));
    }
  }
}

TEST_CASE("observable registry") {
  CHECK(find_observable("kinetic").unit == "p^2");
  CHECK(find_observable("px").weight == 1);
  const auto names = observable_names();
  CHECK(std::find(names.begin(), names.end(), "pxpy") != names.end());
  try {
    find_observable("nope");
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::Config);
    CHECK(std::string(e.what()).find("nope") != std::string::npos);
  }
}

TEST_CASE("limit cycle of a constant and of free equilibrium kinetics") {
  const Flow flow = make_quiescent(1.0);
  const SimConfig cfg = config(flow, zero_potential<double>(), 16, 2.0);
  const auto runs = run_ensemble(cfg, 400, 8, [&](std::uint32_t id) { return initial_state(cfg, id); }, 1, 4);
  ProfileOptions opts;
  opts.n_bins = 16;
  opts.burn_in_periods = 20;
  const PhaseProfile one = limit_cycle(runs, find_observable("constant"), flow, opts);
  for (int b = 0; b < 16; ++b) {
    CHECK(one.mean(b) == 1.0);
    CHECK(one.se(b) == 0.0);
    CHECK(one.count[b] == 8 * 380);
  }
  CHECK(one.bin_hi(15) == flow.period);

  const PhaseProfile kin = limit_cycle(runs, find_observable("kinetic"), flow, opts);
  for (int b = 0; b < 16; ++b) CHECK(std::abs(kin.mean(b) - 3.0 / cfg.beta) <= 4.0 * kin.se(b));

  opts.burn_in_periods = 400;
  CHECK_THROWS_AS(limit_cycle(runs, find_observable("kinetic"), flow, opts), Error);
}

TEST_CASE("sheared limit cycle is T-periodic") {
  const Flow flow = make_flow(FlowKind::Shear, 1.0);
  const SimConfig cfg = config(flow, axis_cosine_potential(flow, canonical_cell(flow)), 16);
  const auto runs = run_ensemble(cfg, 600, 8, [&](std::uint32_t id) { return initial_state(cfg, id); }, 1, 4);
  ProfileOptions opts;
  opts.n_bins = 16;
  opts.burn_in_periods = 20;
  CHECK(periodicity_z(runs, find_observable("pxpy"), flow, opts) < 4.0);
  CHECK(periodicity_z(runs, find_observable("kinetic"), flow, opts) < 4.0);
}

TEST_CASE("convergence rate of an Ornstein-Uhlenbeck mean") {
  const Flow flow = make_quiescent(0.5);
  const SimConfig cfg = config(flow, zero_potential<double>(), 8);
  Particles3 up = Particles3::Zero(3, 1), down = Particles3::Zero(3, 1);
  up(0, 0) = 2.0;
  down(0, 0) = -2.0;
  const auto a = run_ensemble(cfg, 16, 2000, start_at(cfg, up), 0, 4);
  const auto b = run_ensemble(cfg, 16, 2000, start_at(cfg, down), 0, 4, 2000);
  const ConvergenceFit fit = convergence_rate(a, b, find_observable("px"), flow);
  CHECK(fit.window >= 4);
  CHECK(fit.series.size() == 17);
  CHECK(fit.series[0].delta == doctest::Approx(4.0));
  CHECK(fit.lambda_hat == doctest::Approx(cfg.gamma).epsilon(0.1));
  CHECK(fit.r_squared > 0.9);

  try {
    convergence_rate(a, a, find_observable("px"), flow);
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::NoDecayWindow);
  }
}

TEST_CASE("law of large numbers along one trace") {
  const Flow flow = make_quiescent(1.0);
  const SimConfig cfg = config(flow, zero_potential<double>(), 8, 2.0);
  const auto result = run(cfg, 4000, initial_state(cfg, 0), 0, 1);
  const LlnResult c = lln_average(result.trace, find_observable("constant"), flow, cfg.dt);
  CHECK(c.final_value == doctest::Approx(1.0));
  CHECK(c.time.size() == result.trace.size());

  const LlnResult k = lln_average(result.trace, find_observable("kinetic"), flow, cfg.dt);
  CHECK(std::abs(k.first_half.mean - k.second_half.mean) <=
        4.0 * std::hypot(k.first_half.se, k.second_half.se));
  CHECK(std::abs(k.whole.mean - 3.0 / cfg.beta) <= 4.0 * k.whole.se);
  CHECK(std::abs(k.final_value - k.whole.mean) < 0.01);
}

TEST_CASE("stationary moments of the kinetic Lyapunov functions") {
  const Flow flow = make_quiescent(1.0);
  const SimConfig cfg = config(flow, zero_potential<double>(), 4, 2.0);
  const auto result = run(cfg, 20000, initial_state(cfg, 0), 0, 1);
  const double dim = 3.0;
  const MomentCheck k1 = moment_check(result.chain, 1);
  CHECK(std::abs(k1.estimate - (1.0 + dim / cfg.beta)) <= 4.0 * k1.se);
  CHECK(k1.bounded);
  const MomentCheck k2 = moment_check(result.chain, 2);
  CHECK(std::abs(k2.estimate - (1.0 + (dim * dim + 2.0 * dim) / (cfg.beta * cfg.beta))) <= 4.0 * k2.se);

  const MomentCheck sup = moment_check(std::vector<RunResult>{result}, 1, flow, 4, 100);
  CHECK(sup.estimate >= k1.estimate - 4.0 * k1.se);
  CHECK(sup.bounded);
  CHECK(sup.worst_bin >= 0);
  CHECK(sup.worst_bin < 4);

  const std::vector<ChainSample> short_chain(result.chain.begin(), result.chain.begin() + 500);
  try {
    moment_check(short_chain, 1);
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::InsufficientData);
  }
}
