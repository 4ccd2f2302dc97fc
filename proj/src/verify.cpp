#include "neld/verify.hpp"

#include <cmath>
#include <random>

#include "neld/analysis.hpp"

namespace neld {

const std::vector<std::string>& suite_names() {
  static const std::vector<std::string> names = {"remap", "lattice", "potential", "ou", "drift", "convergence"};
  return names;
}

namespace {

using Rng = std::mt19937_64;

CheckResult at_most(const std::string& suite, const std::string& name, double value, double threshold) {
  return {suite, name, value, threshold, value <= threshold};
}

CheckResult at_least(const std::string& suite, const std::string& name, double value, double threshold) {
  return {suite, name, value, threshold, value >= threshold};
}

std::vector<std::pair<std::string, Flow>> test_flows() {
  return {{"shear", make_flow(FlowKind::Shear, 1.0)},
          {"shear_negative", make_flow(FlowKind::Shear, -0.7)},
          {"pef", make_flow(FlowKind::PlanarElongation, 1.0)},
          {"pef_negative", make_flow(FlowKind::PlanarElongation, -0.5)}};
}

Particles3 uniform_particles(Rng& rng, Eigen::Index n, double lo, double hi) {
  std::uniform_real_distribution<double> u(lo, hi);
  Particles3 x(3, n);
  for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] = u(rng);
  return x;
}

std::vector<CheckResult> remap_suite() {
  std::vector<CheckResult> out;
  Rng rng(11);
  for (const auto& [name, flow] : test_flows()) {
    const Cell L0 = canonical_cell(flow);
    std::uniform_real_distribution<double> ut(0.0, 10.0 * flow.period);
    double worst = 0.0;
    for (int i = 0; i < 1000; ++i) {
      State x;
      x.coords = Coords::AbsoluteLagrangian;
      x.t = ut(rng);
      x.q = uniform_particles(rng, 1, -2.0, 2.0);
      x.p = uniform_particles(rng, 1, -2.0, 2.0);
      worst = std::max(worst, check_diagram(flow, L0, x));
    }
    out.push_back(at_most("remap", "diagram_residual_" + name, worst, 1e-10));
  }
  return out;
}

std::vector<CheckResult> lattice_suite() {
  std::vector<CheckResult> out;
  Rng rng(12);
  for (const auto& [name, flow] : test_flows()) {
    std::uniform_real_distribution<double> ut(0.0, 20.0 * flow.period);
    double worst = 0.0;
    for (int i = 0; i < 200; ++i) {
      const double t = ut(rng);
      const Cell a = stretch(flow, phase(flow, t).theta);
      const Cell b = stretch(flow, phase(flow, t + flow.period).theta);
      worst = std::max(worst, (a - b).cwiseAbs().maxCoeff());
    }
    out.push_back(at_most("lattice", "stretch_periodicity_" + name, worst, 1e-12));

    const Cell L0 = canonical_cell(flow);
    const auto frame = remap_lattice(flow, advance_frame(flow, make_frame(flow, L0), flow.period));
    const Cell closed = deformed_lattice(flow, flow.period, L0) * flow.remap_matrix.cast<double>();
    const double closure = std::max((closed - L0).cwiseAbs().maxCoeff(), (frame.cell - L0).cwiseAbs().maxCoeff());
    out.push_back(at_most("lattice", "remap_closure_" + name, closure, 1e-10));
  }
  const Flow pef = make_flow(FlowKind::PlanarElongation, 1.0);
  const Cell L0 = canonical_cell(pef);
  const double base = cell_quality(L0).min_image;
  double worst = base;
  for (int i = 0; i <= 1000; ++i) {
    const double t = 10.0 * pef.period * i / 1000.0;
    worst = std::min(worst, cell_quality(deformed_lattice(pef, phase(pef, t).theta, L0)).min_image);
  }
  out.push_back(at_least("lattice", "kr_min_image_ratio", worst / base, 0.3));
  const double unremapped = cell_quality(Cell(stretch(pef, 5.0))).min_image;
  out.push_back(at_most("lattice", "unremapped_min_image_at_5", unremapped, 1e-2));
  return out;
}

double fd_relative_error(const Potential& spec, const Cell& cell, const Particles3& q) {
  constexpr double h = 1e-6;
  const Particles3 g = gradient(spec, cell, q);
  Particles3 fd(3, q.cols());
  for (Eigen::Index i = 0; i < q.size(); ++i) {
    Particles3 plus = q, minus = q;
    plus.data()[i] += h;
    minus.data()[i] -= h;
    fd.data()[i] = (value(spec, cell, plus) - value(spec, cell, minus)) / (2.0 * h);
  }
  const double scale = std::max(g.cwiseAbs().maxCoeff(), 1e-2 * spec.grad_bound);
  return (g - fd).cwiseAbs().maxCoeff() / scale;
}

std::vector<CheckResult> potential_suite() {
  std::vector<CheckResult> out;
  Rng rng(13);
  const Flow pef = make_flow(FlowKind::PlanarElongation, 1.0);
  const Flow shear = make_flow(FlowKind::Shear, 1.0);
  const Potential cosine = cosine_potential<double>(
      {{Vec3i(1, 0, 0), 0.5}, {Vec3i(0, 1, 1), 0.3}, {Vec3i(2, -1, 0), 0.2}},
      cosine_grad_bound<double>({{Vec3i(1, 0, 0), 0.5}, {Vec3i(0, 1, 1), 0.3}, {Vec3i(2, -1, 0), 0.2}}, pef,
                                canonical_cell(pef)));
  const Potential pair = smooth_pair_potential(1.0, 0.3, 4);
  std::uniform_real_distribution<double> u01(0.0, 1.0);

  double fd_cos = 0.0, fd_pair = 0.0, period_err = 0.0, sup_ratio = 0.0;
  for (int i = 0; i < 200; ++i) {
    const Cell cell_p = deformed_lattice(pef, pef.period * u01(rng), canonical_cell(pef));
    const Particles3 q = cell_p * uniform_particles(rng, 2, 0.0, 1.0);
    fd_cos = std::max(fd_cos, fd_relative_error(cosine, cell_p, q));

    const Cell cell_s = deformed_lattice(shear, shear.period * u01(rng), canonical_cell(shear));
    Particles3 cluster = uniform_particles(rng, 4, 0.0, 0.25);
    cluster.colwise() += Vec3<double>(u01(rng), u01(rng), u01(rng));
    const Particles3 qs = cell_s * cluster;
    fd_pair = std::max(fd_pair, fd_relative_error(pair, cell_s, qs));

    std::uniform_int_distribution<int> z(-1, 1);
    const Vec3<double> shift = cell_p * Vec3<double>(z(rng), z(rng), z(rng));
    Particles3 moved = q;
    moved.col(0) += shift;
    period_err = std::max({period_err, std::abs(value(cosine, cell_p, q) - value(cosine, cell_p, moved)),
                           (gradient(cosine, cell_p, q) - gradient(cosine, cell_p, moved)).cwiseAbs().maxCoeff()});
  }
  for (int i = 0; i < 10000; ++i) {
    const Cell cell = deformed_lattice(pef, pef.period * u01(rng), canonical_cell(pef));
    const Particles3 g = gradient(cosine, cell, Particles3(cell * uniform_particles(rng, 1, 0.0, 1.0)));
    sup_ratio = std::max(sup_ratio, g.colwise().norm().maxCoeff() / cosine.grad_bound);
  }
  out.push_back(at_most("potential", "fd_gradient_cosine", fd_cos, 1e-6));
  out.push_back(at_most("potential", "fd_gradient_pair", fd_pair, 1e-6));
  out.push_back(at_most("potential", "cell_periodicity", period_err, 1e-10));
  out.push_back(at_most("potential", "gradient_bound_ratio", sup_ratio, 1.0));
  return out;
}

std::vector<CheckResult> ou_suite() {
  std::vector<CheckResult> out;
  const Flow flow = make_flow(FlowKind::Shear, 1.0);
  SimParams params;
  params.steps_per_period = 4;
  params.seed = 2024;
  const SimConfig cfg = make_config(flow, zero_potential<double>(), params);
  const RunResult run = neld::run(cfg, 20000, initial_state(cfg, 0), 0);
  const double growth = std::exp(cfg.gamma * flow.period);
  const double g_var = (growth * growth - 1.0) / cfg.beta;
  double z_p = 0.0, z_g = 0.0;
  for (int c = 0; c < 3; ++c) {
    std::vector<double> p2, g2;
    for (std::size_t k = 1; k + 1 < run.chain.size(); ++k) {
      const double p = run.chain[k].P(c, 0);
      const double g = growth * run.chain[k + 1].P(c, 0) - p;
      p2.push_back(p * p);
      g2.push_back(g * g);
    }
    const MeanSe vp = batch_means(p2), vg = batch_means(g2);
    z_p = std::max(z_p, std::abs(vp.mean - 1.0 / cfg.beta) / vp.se);
    z_g = std::max(z_g, std::abs(vg.mean - g_var) / vg.se);
  }
  out.push_back(at_most("ou", "stationary_variance_z", z_p, 3.0));
  out.push_back(at_most("ou", "increment_variance_z", z_g, 3.0));
  return out;
}

std::vector<CheckResult> drift_suite() {
  std::vector<CheckResult> out;
  for (const auto& [name, flow] : std::vector<std::pair<std::string, Flow>>{
           {"shear", make_flow(FlowKind::Shear, 1.0)}, {"pef", make_flow(FlowKind::PlanarElongation, 1.0)}}) {
    SimParams params;
    params.steps_per_period = 16;
    params.seed = 77;
    const SimConfig cfg = make_config(flow, axis_cosine_potential(flow, canonical_cell(flow)), params);
    const RunResult run = neld::run(cfg, 10000, initial_state(cfg, 0), 0);
    for (int n : {1, 2}) {
      out.push_back({"drift", "a" + std::to_string(n) + "_" + name, drift_estimate(run.chain, n).a, 1.0, false});
      out.back().pass = out.back().value < 1.0;
    }
  }
  return out;
}

std::vector<CheckResult> convergence_suite(unsigned threads) {
  std::vector<CheckResult> out;
  SimParams params;
  params.steps_per_period = 4;
  params.seed = 5;
  const Flow flow = make_quiescent(0.5);
  const SimConfig cfg = make_config(flow, zero_potential<double>(), params);
  auto start = [&](double p0) {
    return [&cfg, p0](std::uint32_t id) {
      State s = initial_state(cfg, id);
      s.p.setConstant(p0);
      return s;
    };
  };
  constexpr std::uint32_t n = 10000;
  const auto a = run_ensemble(cfg, 16, n, start(2.0), 0, threads, 0);
  const auto b = run_ensemble(cfg, 16, n, start(-2.0), 0, threads, n);
  const ConvergenceFit fit = convergence_rate(a, b, find_observable("px"), flow);
  out.push_back(at_most("convergence", "ou_rate_relative_error", std::abs(fit.lambda_hat - cfg.gamma) / cfg.gamma, 0.1));
  bool rejected = false;
  try {
    (void)convergence_rate(a, a, find_observable("px"), flow);
  } catch (const Error& e) {
    rejected = e.code() == ErrorCode::NoDecayWindow;
  }
  out.push_back({"convergence", "identical_ensembles_rejected", rejected ? 1.0 : 0.0, 1.0, rejected});
  return out;
}

}  // namespace

std::vector<CheckResult> run_suite(const std::string& suite, unsigned threads) {
  if (suite == "all") {
    std::vector<CheckResult> all;
    for (const auto& name : suite_names()) {
      auto part = run_suite(name, threads);
      all.insert(all.end(), part.begin(), part.end());
    }
    return all;
  }
  if (suite == "remap") return remap_suite();
  if (suite == "lattice") return lattice_suite();
  if (suite == "potential") return potential_suite();
  if (suite == "ou") return ou_suite();
  if (suite == "drift") return drift_suite();
  if (suite == "convergence") return convergence_suite(threads);
  throw Error(ErrorCode::Config, "unknown verification suite '" + suite + "'");
}

}  // namespace neld
