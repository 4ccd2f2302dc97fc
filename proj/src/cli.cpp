#include "neld/cli.hpp"

#include <CLI11.hpp>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>
#include <thread>

#include "neld/analysis.hpp"
#include "neld/verify.hpp"

namespace neld {

namespace fs = std::filesystem;

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

// Tab-separated table with 17 significant digits.
class TsvWriter {
 public:
  TsvWriter(const fs::path& path, const std::vector<std::string>& header) : out_(path) {
    if (!out_) throw Error(ErrorCode::Config, "cannot write '" + path.string() + "'");
    out_.precision(17);
    for (std::size_t i = 0; i < header.size(); ++i) out_ << (i ? "\t" : "") << header[i];
    out_ << '\n';
  }

  TsvWriter& cell(const std::string& s) {
    sep();
    out_ << s;
    return *this;
  }
  TsvWriter& cell(double v) {
    sep();
    if (std::isnan(v)) {
      out_ << "nan";
    } else {
      out_ << v;
    }
    return *this;
  }
  TsvWriter& cell(long long v) {
    sep();
    out_ << v;
    return *this;
  }
  void end() {
    out_ << '\n';
    first_ = true;
  }

 private:
  void sep() {
    if (!first_) out_ << '\t';
    first_ = false;
  }
  std::ofstream out_;
  bool first_ = true;
};

const std::vector<std::string> kProfileHeader = {
    "observable", "unit", "bin", "theta_lo[time]{measured}", "theta_hi[time]{measured}", "count[1]{measured}",
    "mean[unit]{measured}", "se[unit]{measured}"};

const std::vector<std::string> kSummaryHeader = {
    "observable", "unit", "lln_mean[unit]{measured}", "lln_se[unit]{measured}", "lambda_hat[1/time]{fitted}",
    "lambda_se[1/time]{fitted}", "lambda_r2[1]{fitted}", "drift_a1[1]{fitted}", "drift_b1[1]{fitted}",
    "drift_a2[1]{fitted}", "drift_b2[1]{fitted}", "moment_k1[1]{measured}", "moment_k1_se[1]{measured}",
    "moment_k1_bounded[1]{measured}", "moment_k2[1]{measured}", "moment_k2_se[1]{measured}",
    "moment_k2_bounded[1]{measured}"};

State fixed_momentum_start(const SimConfig& cfg, std::uint32_t id, const std::optional<Vec3<double>>& p0) {
  State s = initial_state(cfg, id);
  if (p0) s.p.colwise() = *p0;
  return s;
}

}  // namespace

int cmd_run(const RunConfig& rc, unsigned threads, std::ostream& out, std::ostream& err) {
  try {
    fs::create_directories(rc.output);
  } catch (const fs::filesystem_error& e) {
    err << "error: cannot create output directory '" << rc.output << "': " << e.what() << '\n';
    return kExitUsage;
  }
  const SimConfig& cfg = rc.sim;
  const Flow& flow = cfg.flow;
  const double record_dt = cfg.dt * rc.stride;
  const auto burn_in_periods = static_cast<long long>(std::floor(rc.burn_in * static_cast<double>(rc.n_periods)));

  std::vector<RunResult> ens_a, ens_b;
  try {
    ens_a = run_ensemble(
        cfg, rc.n_periods, rc.n_trajectories,
        [&](std::uint32_t id) { return fixed_momentum_start(cfg, id, rc.initial_momentum); }, rc.stride, threads, 0);
    if (rc.contrast_momentum) {
      ens_b = run_ensemble(
          cfg, rc.n_periods, rc.n_trajectories,
          [&](std::uint32_t id) { return fixed_momentum_start(cfg, id, rc.contrast_momentum); }, rc.stride, threads,
          rc.n_trajectories);
    }
  } catch (const Error& e) {
    if (e.code() != ErrorCode::NonFinite) throw;
    err << "error: numerical blowup at " << e.what() << '\n';
    return kExitBlowup;
  }

  const fs::path dir(rc.output);
  {
    TsvWriter chain(dir / "chain.tsv",
                    {"ensemble", "trajectory", "period", "particle", "time[time]{measured}", "q_x[length]{measured}",
                     "q_y[length]{measured}", "q_z[length]{measured}", "p_x[momentum]{measured}",
                     "p_y[momentum]{measured}", "p_z[momentum]{measured}"});
    const std::vector<std::pair<std::string, const std::vector<RunResult>*>> ensembles = {{"A", &ens_a},
                                                                                          {"B", &ens_b}};
    for (const auto& [label, ens] : ensembles) {
      const long long offset = label == "A" ? 0 : rc.n_trajectories;
      for (std::size_t r = 0; r < ens->size(); ++r) {
        for (const auto& s : (*ens)[r].chain) {
          for (Eigen::Index i = 0; i < s.Q.cols(); ++i) {
            chain.cell(label).cell(offset + static_cast<long long>(r)).cell(s.k).cell(static_cast<long long>(i));
            chain.cell(static_cast<double>(s.k) * flow.period);
            for (int c = 0; c < 3; ++c) chain.cell(s.Q(c, i));
            for (int c = 0; c < 3; ++c) chain.cell(s.P(c, i));
            chain.end();
          }
        }
      }
    }
  }

  TsvWriter profile(dir / "profile.tsv", kProfileHeader);
  TsvWriter summary(dir / "summary.tsv", kSummaryHeader);
  std::unique_ptr<TsvWriter> convergence;
  if (rc.contrast_momentum) {
    convergence = std::make_unique<TsvWriter>(
        dir / "convergence.tsv", std::vector<std::string>{"observable", "unit", "period", "time[time]{measured}",
                                                          "delta[unit]{measured}", "noise_floor[unit]{measured}"});
  }

  DriftFit d1{kNaN, kNaN}, d2{kNaN, kNaN};
  try {
    d1 = drift_estimate(ens_a, 1);
    d2 = drift_estimate(ens_a, 2);
  } catch (const Error& e) {
    if (e.code() != ErrorCode::InsufficientData) throw;
  }
  MomentCheck m1{kNaN, kNaN, kNaN, false}, m2{kNaN, kNaN, kNaN, false};
  try {
    m1 = moment_check(ens_a, 1, flow, rc.phase_bins, burn_in_periods);
    m2 = moment_check(ens_a, 2, flow, rc.phase_bins, burn_in_periods);
  } catch (const Error& e) {
    if (e.code() != ErrorCode::InsufficientData) throw;
  }

  for (const auto& name : rc.observables) {
    const Observable& f = find_observable(name);
    ProfileOptions opts;
    opts.n_bins = rc.phase_bins;
    opts.burn_in_periods = burn_in_periods;
    try {
      const PhaseProfile prof = limit_cycle(ens_a, f, flow, opts);
      for (int b = 0; b < prof.n_bins; ++b) {
        profile.cell(name).cell(f.unit).cell(static_cast<long long>(b)).cell(prof.bin_lo(b)).cell(prof.bin_hi(b));
        profile.cell(prof.count[b]).cell(prof.mean(b)).cell(prof.se(b)).end();
      }
    } catch (const Error& e) {
      if (e.code() != ErrorCode::InsufficientData) throw;
    }

    std::vector<double> finals;
    double single_se = kNaN;
    for (const auto& run : ens_a) {
      if (run.trace.empty()) continue;
      const LlnResult lln = lln_average(run.trace, f, flow, record_dt);
      finals.push_back(lln.final_value);
      single_se = lln.whole.se;
    }
    const MeanSe lln = sample_mean(finals);
    const double lln_mean = finals.empty() ? kNaN : lln.mean;
    const double lln_se = finals.size() >= 2 ? lln.se : single_se;

    ConvergenceFit fit;
    fit.lambda_hat = fit.lambda_se = fit.r_squared = kNaN;
    if (rc.contrast_momentum) {
      try {
        fit = convergence_rate(ens_a, ens_b, f, flow);
      } catch (const Error& e) {
        if (e.code() != ErrorCode::NoDecayWindow && e.code() != ErrorCode::InsufficientData) throw;
        fit.lambda_hat = fit.lambda_se = fit.r_squared = kNaN;
      }
      if (fit.series.empty()) {
        // Keep the raw difference series even when no window could be fitted.
        ConvergenceFit raw;
        for (std::size_t k = 0; k < ens_a.front().chain.size(); ++k) {
          std::vector<double> va, vb;
          for (const auto& run : ens_a) va.push_back(f.eval(flow, 0.0, run.chain[k].Q, run.chain[k].P));
          for (const auto& run : ens_b) vb.push_back(f.eval(flow, 0.0, run.chain[k].Q, run.chain[k].P));
          const MeanSe ma = sample_mean(va), mb = sample_mean(vb);
          raw.series.push_back({ens_a.front().chain[k].k, static_cast<double>(ens_a.front().chain[k].k) * flow.period,
                                std::abs(ma.mean - mb.mean), std::hypot(ma.se, mb.se)});
        }
        fit.series = raw.series;
      }
      for (const auto& pt : fit.series) {
        convergence->cell(name).cell(f.unit).cell(pt.k).cell(pt.t).cell(pt.delta).cell(pt.floor).end();
      }
    }

    summary.cell(name).cell(f.unit).cell(lln_mean).cell(lln_se);
    summary.cell(fit.lambda_hat).cell(fit.lambda_se).cell(fit.r_squared);
    summary.cell(d1.a).cell(d1.b).cell(d2.a).cell(d2.b);
    summary.cell(m1.estimate).cell(m1.se).cell(std::isnan(m1.estimate) ? kNaN : double(m1.bounded));
    summary.cell(m2.estimate).cell(m2.se).cell(std::isnan(m2.estimate) ? kNaN : double(m2.bounded));
    summary.end();
  }
  out << "wrote " << rc.output << " (" << rc.n_trajectories << " trajectories, " << rc.n_periods << " periods)\n";
  return kExitOk;
}

int cmd_verify(const std::string& suite, unsigned threads, std::ostream& out, std::ostream& err) {
  std::vector<CheckResult> results;
  try {
    results = run_suite(suite, threads);
  } catch (const Error& e) {
    if (e.code() != ErrorCode::Config) throw;
    err << "error: " << e.what() << " (known suites: all";
    for (const auto& s : suite_names()) err << ", " << s;
    err << ")\n";
    return kExitUsage;
  }
  bool ok = true;
  out.precision(6);
  for (const auto& r : results) {
    out << (r.pass ? "PASS " : "FAIL ") << r.suite << '.' << r.name << "  value=" << r.value
        << "  threshold=" << r.threshold << '\n';
    ok = ok && r.pass;
  }
  out << (ok ? "all checks passed" : "some checks failed") << '\n';
  return ok ? kExitOk : kExitVerifyFailed;
}

namespace {

using Table = std::vector<std::vector<std::string>>;

std::vector<std::string> split_tabs(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, '\t')) out.push_back(cell);
  if (!line.empty() && line.back() == '\t') out.emplace_back();
  return out;
}

Table read_table(const fs::path& path, const std::vector<std::string>& header) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::Config, "missing " + path.string());
  std::string line;
  if (!std::getline(in, line) || split_tabs(line) != header) {
    throw Error(ErrorCode::Config, "unexpected header in " + path.string());
  }
  Table rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    auto row = split_tabs(line);
    if (row.size() != header.size()) throw Error(ErrorCode::Config, "malformed row in " + path.string());
    rows.push_back(std::move(row));
  }
  return rows;
}

double number(const std::string& text, const fs::path& path) {
  try {
    std::size_t used = 0;
    const double v = std::stod(text, &used);
    if (used == text.size()) return v;
  } catch (const std::exception&) {
  }
  if (text == "nan") return kNaN;
  throw Error(ErrorCode::Config, "non-numeric value '" + text + "' in " + path.string());
}

}  // namespace

int cmd_report(const std::string& dir, const std::string& out_dir, std::ostream& out, std::ostream& err) {
  const fs::path in(dir);
  const fs::path dest(out_dir.empty() ? dir : out_dir);
  Table profile, summary;
  try {
    if (!fs::is_directory(in)) throw Error(ErrorCode::Config, "results directory '" + dir + "' does not exist");
    profile = read_table(in / "profile.tsv", kProfileHeader);
    summary = read_table(in / "summary.tsv", kSummaryHeader);
    if (summary.empty()) throw Error(ErrorCode::Config, "summary.tsv has no rows");
    for (const auto& row : profile) {
      for (std::size_t c = 2; c < row.size(); ++c) (void)number(row[c], in / "profile.tsv");
    }
    for (const auto& row : summary) {
      for (std::size_t c = 2; c < row.size(); ++c) (void)number(row[c], in / "summary.tsv");
    }
    fs::create_directories(dest);
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const fs::filesystem_error& e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  }

  // Summary columns carried into every profile row.
  const std::vector<std::size_t> carried = {4, 6, 7, 9, 11, 14};
  std::vector<std::string> wide_header = {"observable", "unit", "bin", "theta_mid[time]{measured}",
                                          "mean[unit]{measured}", "se[unit]{measured}"};
  for (std::size_t c : carried) wide_header.push_back(kSummaryHeader[c]);
  TsvWriter wide(dest / "report.tsv", wide_header);
  TsvWriter longf(dest / "report_long.tsv", {"observable", "bin", "theta_mid[time]{measured}", "metric", "unit",
                                             "provenance", "value[unit]{provenance}"});
  std::size_t rows = 0;
  for (const auto& s : summary) {
    const fs::path sp = in / "summary.tsv";
    for (const auto& p : profile) {
      if (p[0] != s[0]) continue;
      const fs::path pp = in / "profile.tsv";
      const double mid = 0.5 * (number(p[3], pp) + number(p[4], pp));
      const auto bin = static_cast<long long>(number(p[2], pp));
      wide.cell(s[0]).cell(s[1]).cell(bin).cell(mid).cell(number(p[6], pp)).cell(number(p[7], pp));
      for (std::size_t c : carried) wide.cell(number(s[c], sp));
      wide.end();
      ++rows;
      // Header "name[unit]{provenance}"; the unit "unit" means the observable's own.
      auto emit = [&](const std::string& header, double v) {
        const auto open = header.find('['), close = header.find(']');
        std::string unit = header.substr(open + 1, close - open - 1);
        if (unit == "unit") unit = s[1];
        const std::string tag = header.substr(close + 2, header.size() - close - 3);
        longf.cell(s[0]).cell(bin).cell(mid).cell(header.substr(0, open)).cell(unit).cell(tag).cell(v).end();
      };
      emit(kProfileHeader[6], number(p[6], pp));
      emit(kProfileHeader[7], number(p[7], pp));
      for (std::size_t c : carried) emit(kSummaryHeader[c], number(s[c], sp));
    }
  }
  out << "wrote " << (dest / "report.tsv").string() << " (" << rows << " rows)\n";
  return kExitOk;
}

int cli_main(int argc, char** argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Nonequilibrium Langevin dynamics with Lees-Edwards and Kraynik-Reinelt remapping"};
  app.require_subcommand(1);
  app.fallthrough();
  std::string config_path, out_dir, suite = "";
  std::optional<std::uint64_t> seed;
  unsigned threads = std::max(1u, std::thread::hardware_concurrency());
  app.add_option("--config", config_path, "Run configuration file (key = value)");
  app.add_option("--seed", seed, "Override sim.seed");
  app.add_option("--threads", threads, "Worker threads for ensembles")->check(CLI::PositiveNumber);
  app.add_option("--out", out_dir, "Output directory");

  auto* run = app.add_subcommand("run", "Run an ensemble and write chain, profile and summary tables");
  auto* verify = app.add_subcommand("verify", "Run property suites: remap, lattice, potential, ou, drift, convergence, all");
  verify->add_option("suite", suite, "Suite name");
  std::string results_dir;
  auto* report = app.add_subcommand("report", "Summarize a results directory");
  report->add_option("dir", results_dir, "Directory written by `run`")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (run->parsed()) {
      if (config_path.empty()) {
        err << "error: run needs --config\n";
        return kExitUsage;
      }
      RunConfig rc = load_config(config_path);
      if (seed) rc.sim.seed = *seed;
      if (!out_dir.empty()) rc.output = out_dir;
      return cmd_run(rc, threads, out, err);
    }
    if (verify->parsed()) {
      if (suite.empty()) suite = config_path.empty() ? "all" : load_config(config_path).suite;
      return cmd_verify(suite, threads, out, err);
    }
    return cmd_report(results_dir, out_dir, out, err);
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    if (e.code() == ErrorCode::NonFinite) return kExitBlowup;
    return kExitUsage;
  }
}

}  // namespace neld
