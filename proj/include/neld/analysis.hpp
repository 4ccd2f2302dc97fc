#pragma once

#include <functional>
#include <span>
#include <string>
#include <vector>

#include "neld/dynamics.hpp"

namespace neld {

/// K_n = 1 + ||p||^(2n), the norm taken over all momentum components.
double lyapunov(int n, const Particles3& p);

/// 1 + ||p||^m for a real exponent m > 0.
double lyapunov_power(double m, const Particles3& p);

struct MeanSe {
  double mean = 0.0;
  double se = 0.0;
};

/// Mean and batch-means standard error of a correlated series.
MeanSe batch_means(std::span<const double> x, int n_batches = 32);

/// Mean and i.i.d. standard error.
MeanSe sample_mean(std::span<const double> x);

struct DriftFit {
  double a = 0.0;
  double b = 0.0;
  int bins = 0;
  std::size_t samples = 0;
};

/// Fits E[K(next) | K(current)] <= a K(current) + b from pairs. Samples are
/// binned by quantiles of the current value; the line is the edge of the upper
/// convex hull of (bin mean x, bin mean y + one SE) that spans the overall mean
/// of x, so it dominates every bin.
DriftFit drift_fit(std::span<const double> current, std::span<const double> next, int bins = 20);

/// drift_fit on consecutive samples of one chain with K = K_n.
DriftFit drift_estimate(const std::vector<ChainSample>& chain, int n, int bins = 20);

/// Pools consecutive pairs from every chain of an ensemble.
DriftFit drift_estimate(const std::vector<RunResult>& runs, int n, int bins = 20);

/// Smooth test function of remapped Eulerian (q, p) with analytic derivatives.
struct SmoothObservable {
  std::string name;
  std::function<double(const Particles3& q, const Particles3& p)> value;
  std::function<Particles3(const Particles3& q, const Particles3& p)> grad_q;
  std::function<Particles3(const Particles3& q, const Particles3& p)> grad_p;
  std::function<double(const Particles3& q, const Particles3& p)> laplacian_p;
};

SmoothObservable constant_function(double c);

/// 1 + ||p||^m.
SmoothObservable kinetic_power(double m);

/// <p + A q, grad_q f> - <grad V(q), grad_p f> - gamma <p, grad_p f> + sigma^2 / 2 lap_p f
/// at phase theta in the remapped Eulerian frame.
double generator_apply(const SimConfig& cfg, double theta, const Particles3& q, const Particles3& p,
                       const SmoothObservable& f);

struct GeneratorFit {
  double a_hat = 0.0;
  double b_hat = 0.0;
  std::size_t points = 0;
};

/// Fits U f <= -a_hat f + b_hat for f = 1 + ||p||^m over random points with
/// ||p|| in [0, p_max] and phases in [0, T).
GeneratorFit fit_generator_drift(const SimConfig& cfg, double m, double p_max = 20.0, int points = 4000,
                                 std::uint64_t seed = 1);

/// Observable of (theta, q_bar, p_bar) in remapped Lagrangian coordinates.
struct Observable {
  std::string name;
  std::string unit;
  int weight = 0;  // grows no faster than K_weight
  std::function<double(const Flow& flow, double theta, const Particles3& q, const Particles3& p)> eval;
};

const Observable& find_observable(const std::string& name);
std::vector<std::string> observable_names();

struct PhaseProfile {
  int n_bins = 0;
  double period = 0.0;
  std::vector<double> count;
  std::vector<double> sum;
  std::vector<double> sum_sq;
  // Means over independent units (trajectory, block of periods), used for SE.
  std::vector<double> unit_count;
  std::vector<double> unit_sum;
  std::vector<double> unit_sum_sq;

  double mean(int bin) const;
  double variance(int bin) const;
  double se(int bin) const;
  double bin_lo(int bin) const { return period * bin / n_bins; }
  double bin_hi(int bin) const { return period * (bin + 1) / n_bins; }
};

struct ProfileOptions {
  int n_bins = 32;
  long long burn_in_periods = 0;
  long long block_periods = 4;
  // 0: all periods, 1: even periods only, 2: odd periods only.
  int parity = 0;
  // Use periods with index >= first_period (after burn-in) only.
  long long first_period = 0;
};

/// Phase-binned mean of the observable over trace records of all runs.
PhaseProfile limit_cycle(const std::vector<RunResult>& runs, const Observable& f, const Flow& flow,
                         const ProfileOptions& opts);

/// max over bins of |mean_even - mean_odd| / combined SE.
double periodicity_z(const std::vector<RunResult>& runs, const Observable& f, const Flow& flow,
                     ProfileOptions opts);

struct ConvergencePoint {
  long long k = 0;
  double t = 0.0;
  double delta = 0.0;
  double floor = 0.0;
};

struct ConvergenceFit {
  double lambda_hat = 0.0;
  double lambda_se = 0.0;
  double r_squared = 0.0;
  std::vector<ConvergencePoint> series;
  std::size_t window = 0;
};

/// Rate of |mean_A f - mean_B f| at period boundaries; the fit uses the leading
/// run of points where the difference exceeds three times its noise floor.
ConvergenceFit convergence_rate(const std::vector<RunResult>& a, const std::vector<RunResult>& b,
                                const Observable& f, const Flow& flow);

struct LlnResult {
  std::vector<double> time;
  std::vector<double> running;
  double final_value = 0.0;
  MeanSe whole;
  MeanSe first_half;
  MeanSe second_half;
};

/// Running trapezoid average of f along one trace recorded at spacing dt.
LlnResult lln_average(const std::vector<TraceRecord>& trace, const Observable& f, const Flow& flow,
                      double dt);

struct MomentCheck {
  double estimate = 0.0;
  double se = 0.0;
  double last_quarter = 0.0;
  bool bounded = false;
  int worst_bin = 0;
};

/// Empirical E[K_n] over a chain after discarding burn_in (fraction).
MomentCheck moment_check(const std::vector<ChainSample>& chain, int n, double burn_in = 0.2);

/// sup over phase bins of E[K_n] from trace records of an ensemble.
MomentCheck moment_check(const std::vector<RunResult>& runs, int n, const Flow& flow, int n_bins,
                         long long burn_in_periods);

}  // namespace neld
