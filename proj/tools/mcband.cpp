// mcband: simulation, estimation, confidence bands and coverage experiments
// for scalar diffusions observed at low frequency.

#include "mcband/config.hpp"
#include "mcband/coverage.hpp"
#include "mcband/experiment.hpp"
#include "mcband/io.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <iostream>

using namespace mcband;
namespace fs = std::filesystem;

namespace {

struct Options
{
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<int> workers;
  std::string out;
  std::string method;
  std::string target;
  std::optional<double> alpha;
  std::string input;
  std::string format = "csv";
  std::optional<int> replications;
  std::optional<double> sigma;
  bool resume = false;
  int j_lo = 6;
  int j_hi = 10;
};

void add_common(CLI::App* cmd, Options& o)
{
  cmd->add_option("--config", o.config, "experiment configuration (INI)");
  cmd->add_option("--seed", o.seed, "master seed, overrides sampling.seed");
  cmd->add_option("--out", o.out, "output directory, overrides output.dir");
  cmd->add_option("--alpha", o.alpha, "level, overrides band.alpha");
}

void add_estimation(CLI::App* cmd, Options& o)
{
  cmd->add_option("--input", o.input, "trajectory file (CSV or JSON); simulated if absent");
  cmd->add_option("--method", o.method, "plugin | direct | adaptive");
  cmd->add_option("--target", o.target, "density | drift");
}

ExperimentConfig load_config(const Options& o)
{
  ExperimentConfig c = o.config.empty() ? ExperimentConfig{} : read_config(o.config);
  if (o.seed) {
    c.sampling.seed = *o.seed;
  }
  if (!o.out.empty()) {
    c.output_dir = o.out;
  }
  if (o.alpha) {
    c.band.alpha = *o.alpha;
  }
  if (!o.method.empty()) {
    c.estimator.method = o.method;
    if (o.method != "plugin" && o.target.empty()) {
      c.estimator.target = "drift";
    }
  }
  if (!o.target.empty()) {
    c.estimator.target = o.target;
  }
  if (o.workers) {
    c.coverage.workers = *o.workers;
  }
  if (o.replications) {
    c.coverage.replications = *o.replications;
  }
  validate(c);
  return c;
}

Trajectory input_trajectory(const Experiment& ex, const Options& o)
{
  if (!o.input.empty()) {
    return read_trajectory(o.input);
  }
  return ex.simulate(ex.config().sampling.seed);
}

fs::path out_path(const ExperimentConfig& c, const std::string& name)
{
  return fs::path(c.output_dir) / name;
}

void report(const fs::path& p)
{
  std::cout << "wrote " << p.string() << '\n';
}

int cmd_simulate(const Options& o)
{
  const Experiment ex(load_config(o));
  const auto traj = ex.simulate(ex.config().sampling.seed);
  if (o.format == "json") {
    const auto p = out_path(ex.config(), "trajectory.json");
    write_json(p, trajectory_json(traj));
    report(p);
  } else {
    const auto p = out_path(ex.config(), "trajectory.csv");
    write_text(p, trajectory_csv(traj));
    report(p);
  }
  return 0;
}

int cmd_estimate_density(const Options& o)
{
  const Experiment ex(load_config(o));
  const auto traj = input_trajectory(ex, o);
  const auto est = ex.density_estimate(traj);
  Json j = coeffs_json(est.coeffs);
  j["n"] = est.n;
  j["schedule"] = est.schedule;
  j["sup_mu"] = estimate_sup_mu(est);
  const auto p = out_path(ex.config(), "density.json");
  write_json(p, j);
  report(p);
  return 0;
}

int cmd_estimate_drift(const Options& o)
{
  auto c = load_config(o);
  c.estimator.target = "drift";
  if (c.estimator.method == "adaptive") {
    throw ConfigError("method", "estimate-drift takes plugin or direct; use adapt");
  }
  const Experiment ex(c);
  const auto traj = input_trajectory(ex, o);
  const auto est = ex.drift_estimate(traj);
  Json j = coeffs_json(est.coeffs);
  j["method"] = drift_method_name(est.method);
  j["J"] = est.J;
  j["U"] = est.U;
  j["mu_level"] = est.mu_level;
  j["n"] = est.n;
  j["positivity"] = drift_diagnostics_json(est.diagnostics);
  const auto p = out_path(c, "drift.json");
  write_json(p, j);
  report(p);
  return 0;
}

template<class Center>
void write_band_files(const ExperimentConfig& c,
                      const Json& j,
                      const Center& center,
                      double radius)
{
  const auto jp = out_path(c, "band.json");
  write_json(jp, j);
  report(jp);
  const auto cp = out_path(c, "band.csv");
  write_text(cp, band_rows_csv(band_rows(center, c.a, c.b, radius, c.band.grid_points)));
  report(cp);
}

int cmd_band(const Options& o)
{
  const Experiment ex(load_config(o));
  const auto& c = ex.config();
  const auto traj = input_trajectory(ex, o);
  if (c.estimator.target == "density") {
    const auto res = ex.density_band(traj);
    Json j = density_band_json(res.band);
    j["critical_value"] = critical_value_json(res.critical_value);
    const double r = res.band.linf ? res.band.linf->radius : NAN;
    write_band_files(c, j, res.band.center, r);
  } else if (c.estimator.method == "adaptive") {
    const auto ab = ex.adaptive_band(traj);
    write_band_files(c, adaptive_json(ab), ab.band.center, ab.band.linf->radius);
  } else {
    const auto res = ex.drift_band(traj);
    Json j = drift_band_json(res.band);
    j["critical_value"] = critical_value_json(res.critical_value);
    // D_n has no L-infinity radius of its own; its plot rows carry NaN bounds
    const double r = res.band.linf ? res.band.linf->radius : NAN;
    write_band_files(c, j, res.band.center, r);
  }
  return 0;
}

int cmd_adapt(const Options& o)
{
  auto c = load_config(o);
  c.estimator.target = "drift";
  c.estimator.method = "adaptive";
  const Experiment ex(c);
  const auto traj = input_trajectory(ex, o);
  const auto ab = ex.adaptive_band(traj);
  const auto p = out_path(c, "adapt.json");
  write_json(p, adaptive_json(ab));
  report(p);
  return 0;
}

int cmd_coverage(const Options& o)
{
  const Experiment ex(load_config(o));
  const auto& c = ex.config();
  CoverageOptions opt;
  opt.workers = c.coverage.workers;
  opt.resume = o.resume;
  opt.out_dir = c.output_dir;
  opt.on_record = [](const ReplicationRecord& r) {
    std::fprintf(stderr, "replication %llu: %s%s\n",
                 static_cast<unsigned long long>(r.index),
                 r.ok ? (r.covered ? "covered" : "not covered") : "failed: ",
                 r.ok ? "" : r.message.c_str());
  };
  const auto rep = run_coverage(ex, opt);
  const auto& s = rep.summary;
  std::cout << "coverage " << s["covered"].get<std::size_t>() << "/"
            << s["completed"].get<std::size_t>() << " (failed "
            << s["failed"].get<std::size_t>() << ")\n";
  report(fs::path(c.output_dir) / "report.json");
  return 0;
}

int cmd_quantile(const Options& o)
{
  const Experiment ex(load_config(o));
  const auto& c = ex.config();
  const double n = static_cast<double>(c.sampling.n);
  const bool drift = c.estimator.target == "drift";
  const int J = drift ? ex.drift_level(n) : ex.density_level(n);
  const auto w = drift ? ex.drift_weights() : ex.density_weights();
  CriticalValue cv;
  if (o.sigma) {
    if (c.band.zeta_method == "mc-quantile") {
      MultiScaleCoeffs v(ex.basis(), c.a, c.b, J);
      for (auto& lv : v.levels()) {
        std::fill(lv.values.begin(), lv.values.end(), *o.sigma);
      }
      cv = zeta_mc_quantile(c.band.alpha, v, w, c.band.mc_replications,
                            derive_seed(c.sampling.seed, kQuantileStream));
    } else {
      cv = zeta_gaussian_bound(c.band.alpha, *o.sigma, ex.basis(), w, J, c.a, c.b);
    }
  } else {
    const auto traj = input_trajectory(ex, o);
    cv = drift ? ex.drift_critical_value(traj, ex.drift_estimate(traj))
               : ex.density_critical_value(traj, J);
  }
  Json j = critical_value_json(cv);
  j["J"] = J;
  j["weights"] = weights_json(w);
  const auto p = out_path(c, "critical_value.json");
  write_json(p, j);
  report(p);
  return 0;
}

int cmd_selfsim_check(const Options& o)
{
  const Experiment ex(load_config(o));
  const auto& c = ex.config();
  if (o.j_lo < c.basis.j0 || o.j_hi <= o.j_lo) {
    throw ConfigError("levels", "need j0 <= j-lo < j-hi");
  }
  const auto& b_fn = ex.model().drift;
  const double s = c.model.family == "selfsim" ? c.model.s : c.estimator.s;
  Json rows = Json::array();
  double d1 = INFINITY;
  double d2 = 0.0;
  double prev = NAN;
  for (int J = o.j_lo; J <= o.j_hi; ++J) {
    const auto coeffs = analyze_function(ex.basis(), b_fn, J, c.a, c.b, 6);
    double err = 0.0;
    for (double x : linspace(c.a, c.b, 2049)) {
      err = std::max(err, std::abs(synthesize(coeffs, x) - b_fn(x)));
    }
    const double scaled = err * std::pow(2.0, J * s);
    d1 = std::min(d1, scaled);
    d2 = std::max(d2, scaled);
    rows.push_back({ { "J", J },
                     { "bias", err },
                     { "scaled_bias", scaled },
                     { "ratio", std::isnan(prev) ? Json(nullptr) : Json(prev / err) } });
    prev = err;
  }
  Json j{ { "schema", "mcband.selfsim-check/1" },
          { "model", ex.model().descriptor() },
          { "s", s },
          { "levels", rows },
          { "d1", d1 },
          { "d2", d2 },
          { "expected_ratio", std::pow(2.0, s) } };
  const auto p = out_path(c, "selfsim.json");
  write_json(p, j);
  report(p);
  return 0;
}

} // namespace

int main(int argc, char** argv)
{
  CLI::App app{ "Confidence bands for invariant densities and drifts of diffusions" };
  app.require_subcommand(1);
  bool json_errors = false;
  app.add_flag("--json-errors", json_errors, "print errors as JSON on stderr");
  Options o;

  auto* sim = app.add_subcommand("simulate", "simulate a trajectory");
  add_common(sim, o);
  sim->add_option("--format", o.format, "csv | json")->check(CLI::IsMember({ "csv", "json" }));

  auto* ed = app.add_subcommand("estimate-density", "wavelet projection density estimate");
  add_common(ed, o);
  add_estimation(ed, o);

  auto* eb = app.add_subcommand("estimate-drift", "plug-in or direct drift estimate");
  add_common(eb, o);
  add_estimation(eb, o);

  auto* band = app.add_subcommand("band", "confidence band JSON and plot CSV");
  add_common(band, o);
  add_estimation(band, o);

  auto* adapt = app.add_subcommand("adapt", "Lepski selection and adaptive drift band");
  add_common(adapt, o);
  add_estimation(adapt, o);

  auto* cov = app.add_subcommand("coverage", "Monte Carlo coverage experiment");
  add_common(cov, o);
  cov->add_option("--workers", o.workers, "worker threads");
  cov->add_option("--replications", o.replications, "overrides coverage.replications");
  cov->add_option("--method", o.method, "plugin | direct | adaptive");
  cov->add_option("--target", o.target, "density | drift");
  cov->add_flag("--resume", o.resume, "keep records already written");

  auto* q = app.add_subcommand("quantile", "critical value");
  add_common(q, o);
  add_estimation(q, o);
  q->add_option("--sigma", o.sigma, "use this Sigma instead of estimating it");

  auto* ss = app.add_subcommand("selfsim-check", "projection bias ratios of the drift");
  add_common(ss, o);
  ss->add_option("--j-lo", o.j_lo, "first level");
  ss->add_option("--j-hi", o.j_hi, "last level");

  for (auto* sub : app.get_subcommands({})) {
    sub->add_flag("--json-errors", json_errors, "print errors as JSON on stderr");
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) {
      return app.exit(e);
    }
    if (json_errors) {
      Json j{ { "error", { { "kind", "usage" }, { "message", e.what() }, { "exit_code", 2 } } } };
      std::cerr << j.dump() << '\n';
      return 2;
    }
    app.exit(e);
    return 2;
  }

  try {
    if (sim->parsed()) {
      return cmd_simulate(o);
    }
    if (ed->parsed()) {
      return cmd_estimate_density(o);
    }
    if (eb->parsed()) {
      return cmd_estimate_drift(o);
    }
    if (band->parsed()) {
      return cmd_band(o);
    }
    if (adapt->parsed()) {
      return cmd_adapt(o);
    }
    if (cov->parsed()) {
      return cmd_coverage(o);
    }
    if (q->parsed()) {
      return cmd_quantile(o);
    }
    return cmd_selfsim_check(o);
  } catch (const std::exception& e) {
    const auto j = error_json(e);
    if (json_errors) {
      std::cerr << j.dump() << '\n';
    } else {
      std::cerr << "error: " << e.what() << '\n';
    }
    return j["error"]["exit_code"].get<int>();
  }
}
