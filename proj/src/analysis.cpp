#include "neld/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace neld {

double lyapunov(int n, const Particles3& p) { return 1.0 + std::pow(p.squaredNorm(), n); }

double lyapunov_power(double m, const Particles3& p) { return 1.0 + std::pow(p.norm(), m); }

MeanSe sample_mean(std::span<const double> x) {
  MeanSe out;
  if (x.empty()) return out;
  const double n = static_cast<double>(x.size());
  out.mean = std::accumulate(x.begin(), x.end(), 0.0) / n;
  if (x.size() < 2) return out;
  double ss = 0.0;
  for (double v : x) ss += (v - out.mean) * (v - out.mean);
  out.se = std::sqrt(ss / (n - 1.0) / n);
  return out;
}

MeanSe batch_means(std::span<const double> x, int n_batches) {
  if (n_batches < 2 || x.size() < static_cast<std::size_t>(2 * n_batches)) return sample_mean(x);
  const std::size_t len = x.size() / static_cast<std::size_t>(n_batches);
  std::vector<double> means(static_cast<std::size_t>(n_batches));
  for (std::size_t b = 0; b < means.size(); ++b) {
    means[b] = std::accumulate(x.begin() + b * len, x.begin() + (b + 1) * len, 0.0) / static_cast<double>(len);
  }
  MeanSe out = sample_mean(means);
  out.mean = std::accumulate(x.begin(), x.end(), 0.0) / static_cast<double>(x.size());
  return out;
}

namespace {

struct Point {
  double x;
  double y;
};

double cross(const Point& o, const Point& a, const Point& b) {
  return (a.x - o.x) * (b.y - o.y) - (a.y - o.y) * (b.x - o.x);
}

// Upper hull, left to right, of points sorted by x.
std::vector<Point> upper_hull(std::vector<Point> pts) {
  std::sort(pts.begin(), pts.end(), [](const Point& a, const Point& b) { return a.x < b.x || (a.x == b.x && a.y < b.y); });
  std::vector<Point> hull;
  for (const Point& p : pts) {
    while (hull.size() >= 2 && cross(hull[hull.size() - 2], hull.back(), p) >= 0.0) hull.pop_back();
    if (!hull.empty() && hull.back().x == p.x) hull.pop_back();
    hull.push_back(p);
  }
  return hull;
}

}  // namespace

DriftFit drift_fit(std::span<const double> current, std::span<const double> next, int bins) {
  constexpr std::size_t kMinSamples = 1000;
  if (current.size() != next.size() || current.size() < kMinSamples) {
    throw Error(ErrorCode::InsufficientData, "drift fit needs at least 1000 transition pairs");
  }
  const auto [lo, hi] = std::minmax_element(current.begin(), current.end());
  if (!(*hi - *lo > 1e-12 * std::max(1.0, std::abs(*hi)))) {
    throw Error(ErrorCode::InsufficientData, "drift fit needs spread in the current state");
  }
  bins = std::max(2, bins);
  std::vector<std::size_t> order(current.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return current[a] < current[b]; });

  std::vector<Point> pts;
  double x_total = 0.0;
  for (int b = 0; b < bins; ++b) {
    const std::size_t first = order.size() * b / bins;
    const std::size_t last = order.size() * (b + 1) / bins;
    std::vector<double> ys;
    double sx = 0.0;
    for (std::size_t i = first; i < last; ++i) {
      sx += current[order[i]];
      ys.push_back(next[order[i]]);
    }
    const MeanSe my = sample_mean(ys);
    pts.push_back({sx / static_cast<double>(last - first), my.mean + my.se});
    x_total += sx;
  }
  const double x_mean = x_total / static_cast<double>(current.size());
  const std::vector<Point> hull = upper_hull(pts);
  if (hull.size() < 2) throw Error(ErrorCode::InsufficientData, "drift fit is degenerate");
  std::size_t edge = 0;
  while (edge + 2 < hull.size() && hull[edge + 1].x < x_mean) ++edge;
  DriftFit fit;
  fit.a = (hull[edge + 1].y - hull[edge].y) / (hull[edge + 1].x - hull[edge].x);
  fit.b = hull[edge].y - fit.a * hull[edge].x;
  fit.bins = bins;
  fit.samples = current.size();
  return fit;
}

DriftFit drift_estimate(const std::vector<ChainSample>& chain, int n, int bins) {
  std::vector<double> x, y;
  for (std::size_t i = 0; i + 1 < chain.size(); ++i) {
    x.push_back(lyapunov(n, chain[i].P));
    y.push_back(lyapunov(n, chain[i + 1].P));
  }
  return drift_fit(x, y, bins);
}

DriftFit drift_estimate(const std::vector<RunResult>& runs, int n, int bins) {
  std::vector<double> x, y;
  for (const auto& run : runs) {
    for (std::size_t i = 0; i + 1 < run.chain.size(); ++i) {
      x.push_back(lyapunov(n, run.chain[i].P));
      y.push_back(lyapunov(n, run.chain[i + 1].P));
    }
  }
  return drift_fit(x, y, bins);
}

SmoothObservable constant_function(double c) {
  auto zero = [](const Particles3& q, const Particles3&) { return Particles3(Particles3::Zero(3, q.cols())); };
  return {"constant", [c](const Particles3&, const Particles3&) { return c; }, zero, zero,
          [](const Particles3&, const Particles3&) { return 0.0; }};
}

SmoothObservable kinetic_power(double m) {
  SmoothObservable f;
  f.name = "kinetic_power";
  f.value = [m](const Particles3&, const Particles3& p) { return 1.0 + std::pow(p.norm(), m); };
  f.grad_q = [](const Particles3& q, const Particles3&) { return Particles3(Particles3::Zero(3, q.cols())); };
  f.grad_p = [m](const Particles3&, const Particles3& p) {
    const double r = p.norm();
    if (r == 0.0) return Particles3(Particles3::Zero(3, p.cols()));
    return Particles3(m * std::pow(r, m - 2.0) * p);
  };
  f.laplacian_p = [m](const Particles3&, const Particles3& p) {
    const double r = p.norm();
    const double dim = static_cast<double>(p.size());
    if (r == 0.0) return m == 2.0 ? 2.0 * dim : 0.0;
    return m * (m + dim - 2.0) * std::pow(r, m - 2.0);
  };
  return f;
}

double generator_apply(const SimConfig& cfg, double theta, const Particles3& q, const Particles3& p,
                       const SmoothObservable& f) {
  const Particles3 gq = f.grad_q(q, p);
  const Particles3 gp = f.grad_p(q, p);
  const Particles3 grad_v = gradient(cfg.potential, deformed_lattice(cfg.flow, theta, cfg.L0), q);
  const Particles3 velocity = p + cfg.flow.A * q;
  return (velocity.array() * gq.array()).sum() - (grad_v.array() * gp.array()).sum() -
         cfg.gamma * (p.array() * gp.array()).sum() + 0.5 * cfg.sigma * cfg.sigma * f.laplacian_p(q, p);
}

GeneratorFit fit_generator_drift(const SimConfig& cfg, double m, double p_max, int points, std::uint64_t seed) {
  const SmoothObservable f = kinetic_power(m);
  const Eigen::Index d = cfg.particles;
  const auto per_point = static_cast<std::size_t>(6 * d + 2);
  std::vector<double> u(per_point), g(static_cast<std::size_t>(3 * d));
  const CounterRng rng(seed, 0);
  std::vector<Point> pts;
  for (int i = 0; i < points; ++i) {
    rng.uniforms(static_cast<std::uint64_t>(2 * i), u);
    rng.normals(static_cast<std::uint64_t>(2 * i + 1), g);
    const double theta = cfg.flow.period * u[0];
    Particles3 q = deformed_lattice(cfg.flow, theta, cfg.L0) * Eigen::Map<const Particles3>(u.data() + 2, 3, d);
    Particles3 p = Eigen::Map<const Particles3>(g.data(), 3, d);
    const double norm = p.norm();
    if (norm > 0.0) p *= p_max * u[1] / norm;
    pts.push_back({f.value(q, p), generator_apply(cfg, theta, q, p, f)});
  }
  const std::vector<Point> hull = upper_hull(pts);
  if (hull.size() < 2) throw Error(ErrorCode::InsufficientData, "generator fit is degenerate");
  // Tail edge: the hull edge spanning the 90th percentile of f.
  std::vector<double> xs;
  for (const Point& pt : pts) xs.push_back(pt.x);
  const auto nth = xs.begin() + static_cast<std::ptrdiff_t>(9 * xs.size() / 10);
  std::nth_element(xs.begin(), nth, xs.end());
  std::size_t edge = 0;
  while (edge + 2 < hull.size() && hull[edge + 1].x < *nth) ++edge;
  const Point& x0 = hull[edge];
  const Point& x1 = hull[edge + 1];
  GeneratorFit fit;
  fit.a_hat = -(x1.y - x0.y) / (x1.x - x0.x);
  fit.b_hat = -std::numeric_limits<double>::infinity();
  for (const Point& pt : pts) fit.b_hat = std::max(fit.b_hat, pt.y + fit.a_hat * pt.x);
  fit.points = pts.size();
  return fit;
}

namespace {

std::vector<Observable> make_registry() {
  auto eulerian = [](const Flow& flow, double theta, const Particles3& p) {
    return Particles3(stretch(flow, theta) * p);
  };
  return {
      {"constant", "1", 0, [](const Flow&, double, const Particles3&, const Particles3&) { return 1.0; }},
      {"kinetic", "p^2", 1, [](const Flow&, double, const Particles3&, const Particles3& p) { return p.squaredNorm(); }},
      {"kinetic_eulerian", "p^2", 1,
       [eulerian](const Flow& flow, double theta, const Particles3&, const Particles3& p) {
         return eulerian(flow, theta, p).squaredNorm();
       }},
      {"pxpy", "p^2", 1,
       [eulerian](const Flow& flow, double theta, const Particles3&, const Particles3& p) {
         const Particles3 pe = eulerian(flow, theta, p);
         return (pe.row(0).array() * pe.row(1).array()).sum();
       }},
      {"px", "p", 1, [](const Flow&, double, const Particles3&, const Particles3& p) { return p.row(0).sum(); }},
      {"lyapunov1", "1", 1, [](const Flow&, double, const Particles3&, const Particles3& p) { return lyapunov(1, p); }},
      {"lyapunov2", "1", 2, [](const Flow&, double, const Particles3&, const Particles3& p) { return lyapunov(2, p); }},
  };
}

const std::vector<Observable>& registry() {
  static const std::vector<Observable> r = make_registry();
  return r;
}

}  // namespace

const Observable& find_observable(const std::string& name) {
  for (const auto& obs : registry()) {
    if (obs.name == name) return obs;
  }
  throw Error(ErrorCode::Config, "unknown observable '" + name + "'");
}

std::vector<std::string> observable_names() {
  std::vector<std::string> out;
  for (const auto& obs : registry()) out.push_back(obs.name);
  return out;
}

double PhaseProfile::mean(int bin) const { return count[bin] > 0 ? sum[bin] / count[bin] : 0.0; }

double PhaseProfile::variance(int bin) const {
  if (count[bin] < 2) return 0.0;
  const double m = mean(bin);
  return std::max(0.0, (sum_sq[bin] - count[bin] * m * m) / (count[bin] - 1.0));
}

double PhaseProfile::se(int bin) const {
  if (unit_count[bin] >= 2) {
    const double n = unit_count[bin];
    const double m = unit_sum[bin] / n;
    const double var = std::max(0.0, (unit_sum_sq[bin] - n * m * m) / (n - 1.0));
    return std::sqrt(var / n);
  }
  return count[bin] > 0 ? std::sqrt(variance(bin) / count[bin]) : 0.0;
}

PhaseProfile limit_cycle(const std::vector<RunResult>& runs, const Observable& f, const Flow& flow,
                         const ProfileOptions& opts) {
  if (opts.n_bins < 1) throw Error(ErrorCode::Config, "phase bins must be >= 1");
  const int nb = opts.n_bins;
  PhaseProfile prof;
  prof.n_bins = nb;
  prof.period = flow.period;
  for (auto* v : {&prof.count, &prof.sum, &prof.sum_sq, &prof.unit_count, &prof.unit_sum, &prof.unit_sum_sq}) {
    v->assign(static_cast<std::size_t>(nb), 0.0);
  }
  const long long start = std::max(opts.burn_in_periods, opts.first_period);
  const long long block = std::max<long long>(1, opts.block_periods);
  std::vector<double> ucount(static_cast<std::size_t>(nb)), usum(static_cast<std::size_t>(nb));
  auto flush = [&] {
    for (int b = 0; b < nb; ++b) {
      if (ucount[b] > 0) {
        const double m = usum[b] / ucount[b];
        prof.unit_count[b] += 1.0;
        prof.unit_sum[b] += m;
        prof.unit_sum_sq[b] += m * m;
      }
      ucount[b] = 0.0;
      usum[b] = 0.0;
    }
  };
  for (const auto& run : runs) {
    long long unit = -1;
    for (const auto& rec : run.trace) {
      if (rec.period < start) continue;
      if (opts.parity == 1 && rec.period % 2 != 0) continue;
      if (opts.parity == 2 && rec.period % 2 == 0) continue;
      const long long this_unit = (rec.period - start) / block;
      if (this_unit != unit) {
        flush();
        unit = this_unit;
      }
      int b = static_cast<int>(std::floor(rec.theta / flow.period * nb));
      b = std::clamp(b, 0, nb - 1);
      const double v = f.eval(flow, rec.theta, rec.q, rec.p);
      prof.count[b] += 1.0;
      prof.sum[b] += v;
      prof.sum_sq[b] += v * v;
      ucount[b] += 1.0;
      usum[b] += v;
    }
    flush();
  }
  if (std::accumulate(prof.count.begin(), prof.count.end(), 0.0) == 0.0) {
    throw Error(ErrorCode::InsufficientData, "no trace records after burn-in");
  }
  return prof;
}

double periodicity_z(const std::vector<RunResult>& runs, const Observable& f, const Flow& flow,
                     ProfileOptions opts) {
  opts.parity = 1;
  const PhaseProfile even = limit_cycle(runs, f, flow, opts);
  opts.parity = 2;
  const PhaseProfile odd = limit_cycle(runs, f, flow, opts);
  double worst = 0.0;
  for (int b = 0; b < opts.n_bins; ++b) {
    const double diff = std::abs(even.mean(b) - odd.mean(b));
    const double se = std::hypot(even.se(b), odd.se(b));
    if (diff == 0.0) continue;
    worst = std::max(worst, se > 0.0 ? diff / se : std::numeric_limits<double>::infinity());
  }
  return worst;
}

ConvergenceFit convergence_rate(const std::vector<RunResult>& a, const std::vector<RunResult>& b,
                                const Observable& f, const Flow& flow) {
  if (a.empty() || b.empty()) throw Error(ErrorCode::InsufficientData, "convergence needs two ensembles");
  std::size_t periods = std::numeric_limits<std::size_t>::max();
  for (const auto* ens : {&a, &b}) {
    for (const auto& run : *ens) periods = std::min(periods, run.chain.size());
  }
  auto stats = [&](const std::vector<RunResult>& ens, std::size_t k) {
    std::vector<double> v;
    v.reserve(ens.size());
    for (const auto& run : ens) v.push_back(f.eval(flow, 0.0, run.chain[k].Q, run.chain[k].P));
    return sample_mean(v);
  };
  ConvergenceFit fit;
  for (std::size_t k = 0; k < periods; ++k) {
    const MeanSe ma = stats(a, k), mb = stats(b, k);
    fit.series.push_back({a.front().chain[k].k, static_cast<double>(a.front().chain[k].k) * flow.period,
                          std::abs(ma.mean - mb.mean), std::hypot(ma.se, mb.se)});
  }
  while (fit.window < fit.series.size()) {
    const auto& pt = fit.series[fit.window];
    if (!(pt.delta > 0.0 && pt.delta > 3.0 * pt.floor)) break;
    ++fit.window;
  }
  if (fit.window < 3) {
    throw Error(ErrorCode::NoDecayWindow, "ensemble difference is within the noise floor after " +
                                              std::to_string(fit.window) + " periods");
  }
  // Weighted least squares of log delta on t. Var(log delta) ~ (floor/delta)^2;
  // the 1e-4 term caps the weight of noise-free points (e.g. a deterministic start).
  double sw = 0.0, st = 0.0, sy = 0.0;
  std::vector<double> w(fit.window), y(fit.window);
  for (std::size_t i = 0; i < fit.window; ++i) {
    const auto& pt = fit.series[i];
    const double rel = pt.floor / pt.delta;
    w[i] = 1.0 / (rel * rel + 1e-4);
    y[i] = std::log(pt.delta);
    sw += w[i];
    st += w[i] * pt.t;
    sy += w[i] * y[i];
  }
  const double tm = st / sw, ym = sy / sw;
  double stt = 0.0, sty = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < fit.window; ++i) {
    const double dt = fit.series[i].t - tm, dy = y[i] - ym;
    stt += w[i] * dt * dt;
    sty += w[i] * dt * dy;
    syy += w[i] * dy * dy;
  }
  const double slope = sty / stt;
  const double n = static_cast<double>(fit.window);
  fit.lambda_hat = -slope;
  fit.r_squared = syy > 0.0 ? sty * sty / (stt * syy) : 1.0;
  const double resid = std::max(0.0, syy - slope * sty);
  fit.lambda_se = std::sqrt(resid / (n - 2.0) / stt);
  return fit;
}

LlnResult lln_average(const std::vector<TraceRecord>& trace, const Observable& f, const Flow& flow, double dt) {
  LlnResult out;
  if (trace.empty()) return out;
  std::vector<double> values;
  values.reserve(trace.size());
  for (const auto& rec : trace) values.push_back(f.eval(flow, rec.theta, rec.q, rec.p));
  double integral = 0.0;
  out.time.push_back(0.0);
  out.running.push_back(values[0]);
  for (std::size_t i = 1; i < values.size(); ++i) {
    integral += 0.5 * (values[i - 1] + values[i]);
    out.time.push_back(static_cast<double>(i) * dt);
    out.running.push_back(integral / static_cast<double>(i));
  }
  out.final_value = out.running.back();
  const std::span<const double> all(values);
  const std::size_t half = values.size() / 2;
  out.whole = batch_means(all);
  out.first_half = batch_means(all.subspan(0, half));
  out.second_half = batch_means(all.subspan(half));
  return out;
}

MomentCheck moment_check(const std::vector<ChainSample>& chain, int n, double burn_in) {
  const auto skip = static_cast<std::size_t>(std::floor(std::clamp(burn_in, 0.0, 1.0) * chain.size()));
  if (chain.size() < skip + 1000) throw Error(ErrorCode::InsufficientData, "moment check needs 1000 samples after burn-in");
  std::vector<double> k;
  for (std::size_t i = skip; i < chain.size(); ++i) k.push_back(lyapunov(n, chain[i].P));
  MomentCheck out;
  const MeanSe whole = batch_means(k);
  out.estimate = whole.mean;
  out.se = whole.se;
  const std::span<const double> all(k);
  out.last_quarter = sample_mean(all.subspan(k.size() - k.size() / 4)).mean;
  out.bounded = std::abs(out.last_quarter - out.estimate) <= 0.1 * out.estimate;
  return out;
}

MomentCheck moment_check(const std::vector<RunResult>& runs, int n, const Flow& flow, int n_bins,
                         long long burn_in_periods) {
  long long periods = 0;
  std::size_t records = 0;
  for (const auto& run : runs) {
    if (!run.trace.empty()) periods = std::max(periods, run.trace.back().period + 1);
    records += run.trace.size();
  }
  if (records < 1000) throw Error(ErrorCode::InsufficientData, "moment check needs 1000 trace records");
  const Observable& f = find_observable(n == 1 ? "lyapunov1" : "lyapunov2");
  Observable fn = f;
  if (n > 2) {
    fn.eval = [n](const Flow&, double, const Particles3&, const Particles3& p) { return lyapunov(n, p); };
  }
  ProfileOptions opts;
  opts.n_bins = n_bins;
  opts.burn_in_periods = burn_in_periods;
  const PhaseProfile full = limit_cycle(runs, fn, flow, opts);
  opts.first_period = periods - std::max<long long>(1, (periods - burn_in_periods) / 4);
  const PhaseProfile tail = limit_cycle(runs, fn, flow, opts);
  MomentCheck out;
  for (int b = 0; b < n_bins; ++b) {
    if (full.mean(b) > out.estimate) {
      out.estimate = full.mean(b);
      out.se = full.se(b);
      out.worst_bin = b;
    }
  }
  out.last_quarter = tail.mean(out.worst_bin);
  out.bounded = std::abs(out.last_quarter - out.estimate) <= 0.1 * out.estimate;
  return out;
}

}  // namespace neld
