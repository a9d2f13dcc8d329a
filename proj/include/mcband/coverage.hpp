#pragma once

#include "mcband/experiment.hpp"
#include "mcband/holder.hpp"
#include "mcband/io.hpp"

#include <atomic>
#include <chrono>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <mutex>
#include <optional>
#include <thread>

namespace mcband {

inline constexpr const char* kReplicationSchema = "mcband.replication/1";
inline constexpr const char* kCoverageSchema = "mcband.coverage-report/1";

//! Coefficients and Hölder norms of the configured model's true density and
//! drift, computed once per experiment for the levels the bands will use.
class Truth
{
public:
  explicit Truth(const Experiment& ex)
    : ex_(ex)
  {
    const auto& m = ex.model();
    if (!m.has_invariant_density()) {
      throw ConfigError("model.family", "coverage needs a model with an invariant law");
    }
    const auto& c = ex.config();
    const double n = static_cast<double>(c.sampling.n);
    if (c.estimator.target == "density" || c.band.drift_mode == "D_n") {
      const int J = ex.density_level(n);
      density_coeffs_.emplace(J, analyze_function(ex.basis(), m.invariant_density, J, c.a, c.b));
      density_holder_ = holder_norm(m.invariant_density, ex.density_regularity(), c.a, c.b,
                                    1025, m.invariant_density_derivative);
    }
    if (c.estimator.target == "drift") {
      std::vector<int> levels;
      if (c.estimator.method == "adaptive") {
        levels = ex.lepski_config(n).grid();
      } else {
        levels.push_back(ex.drift_level(n));
      }
      for (int J : levels) {
        drift_coeffs_.emplace(J, analyze_function(ex.basis(), m.drift, J, c.a, c.b));
      }
      drift_holder_ = drift_holder(c.estimator.s);
    }
  }

  const MultiScaleCoeffs& density_coeffs(int J) const { return density_coeffs_.at(J); }
  const MultiScaleCoeffs& drift_coeffs(int J) const { return drift_coeffs_.at(J); }
  double density_holder() const noexcept { return density_holder_; }
  double drift_holder() const noexcept { return drift_holder_; }

  double drift_holder(double s) const
  {
    const auto& m = ex_.model();
    return holder_norm(m.drift, s, ex_.a(), ex_.b(), 1025, m.drift_derivative);
  }

private:
  const Experiment& ex_;
  std::map<int, MultiScaleCoeffs> density_coeffs_;
  std::map<int, MultiScaleCoeffs> drift_coeffs_;
  double density_holder_ = 0.0;
  double drift_holder_ = 0.0;
};

struct ReplicationRecord
{
  std::uint64_t index = 0;
  std::uint64_t seed = 0;
  bool ok = true;
  std::string error_kind;
  std::string message;
  bool covered = false;
  std::optional<bool> covered_image; ///< D_n membership of the true drift
  std::optional<double> diameter;    ///< L-infinity diameter, when defined
  int J = 0;
  double zeta = 0.0;
  double sigma = 0.0;
  std::optional<int> J_hat;
  std::optional<double> s_hat;
  std::optional<bool> saturated;
};

namespace detail {

template<class T>
Json opt_json(const std::optional<T>& v)
{
  return v ? Json(*v) : Json(nullptr);
}

template<class T>
std::optional<T> json_opt(const Json& j, const char* key)
{
  if (!j.contains(key) || j.at(key).is_null()) {
    return std::nullopt;
  }
  return j.at(key).get<T>();
}

} // namespace detail

inline Json to_json(const ReplicationRecord& r)
{
  return Json{ { "schema", kReplicationSchema },
               { "index", r.index },
               { "seed", r.seed },
               { "status", r.ok ? "ok" : "failed" },
               { "error_kind", r.ok ? Json(nullptr) : Json(r.error_kind) },
               { "message", r.ok ? Json(nullptr) : Json(r.message) },
               { "covered", r.covered },
               { "covered_image", detail::opt_json(r.covered_image) },
               { "diameter", detail::opt_json(r.diameter) },
               { "J", r.J },
               { "zeta", r.zeta },
               { "Sigma", r.sigma },
               { "J_hat", detail::opt_json(r.J_hat) },
               { "s_hat", detail::opt_json(r.s_hat) },
               { "saturated", detail::opt_json(r.saturated) } };
}

inline ReplicationRecord replication_from_json(const Json& j)
{
  try {
    ReplicationRecord r;
    r.index = j.at("index").get<std::uint64_t>();
    r.seed = j.at("seed").get<std::uint64_t>();
    r.ok = j.at("status").get<std::string>() == "ok";
    if (!r.ok) {
      r.error_kind = j.at("error_kind").get<std::string>();
      r.message = j.at("message").get<std::string>();
    }
    r.covered = j.at("covered").get<bool>();
    r.covered_image = detail::json_opt<bool>(j, "covered_image");
    r.diameter = detail::json_opt<double>(j, "diameter");
    r.J = j.at("J").get<int>();
    r.zeta = j.at("zeta").get<double>();
    r.sigma = j.at("Sigma").get<double>();
    r.J_hat = detail::json_opt<int>(j, "J_hat");
    r.s_hat = detail::json_opt<double>(j, "s_hat");
    r.saturated = detail::json_opt<bool>(j, "saturated");
    return r;
  } catch (const nlohmann::json::exception& e) {
    throw IoError(std::string("replication record: ") + e.what());
  }
}

//! One replication: simulate with the derived seed, build the configured
//! band and test the truth. Errors are recorded, never thrown.
inline ReplicationRecord run_replication(const Experiment& ex,
                                         const Truth& truth,
                                         std::uint64_t index)
{
  const auto& c = ex.config();
  ReplicationRecord rec;
  rec.index = index;
  rec.seed = derive_seed(c.sampling.seed, index);
  try {
    const auto traj = ex.simulate(rec.seed);
    const auto& m = ex.model();
    if (c.estimator.target == "density") {
      auto res = ex.density_band(traj);
      const auto& band = res.band;
      rec.J = band.center.level();
      rec.zeta = res.critical_value.zeta;
      rec.sigma = res.critical_value.sigma;
      if (band.mode == BandMode::linf) {
        rec.covered = band_contains(band, m.invariant_density);
      } else {
        rec.covered =
          band_contains(band, truth.density_coeffs(rec.J), truth.density_holder());
      }
      if (band.linf) {
        rec.diameter = band.linf_diameter();
      }
      if (band.cap && c.basis.N >= 3) {
        const auto image = band_drift_image(std::make_shared<const DensityBand>(band),
                                            -12.0, 12.0, ex.drift_options());
        rec.covered_image = band_contains(image, m.drift);
      }
    } else if (c.estimator.method == "adaptive") {
      auto ab = ex.adaptive_band(traj);
      const auto& sel = ab.info.selection;
      rec.J = sel.J_hat;
      rec.J_hat = sel.J_hat;
      rec.s_hat = sel.s_hat;
      rec.saturated = sel.saturated;
      rec.zeta = ab.band.zeta;
      rec.sigma = ab.info.sigma_drift;
      rec.covered = band_contains(ab.band, truth.drift_coeffs(sel.J_hat),
                                  truth.drift_holder(sel.s_hat));
      rec.diameter = ab.band.linf_diameter();
    } else {
      auto res = ex.drift_band(traj);
      const auto& band = res.band;
      rec.J = band.center.J;
      rec.zeta = res.critical_value.zeta;
      rec.sigma = res.critical_value.sigma;
      if (band.mode == DriftBandMode::image_of_density_band) {
        rec.covered = band_contains(band, m.drift);
      } else {
        rec.covered = band_contains(band, truth.drift_coeffs(rec.J), truth.drift_holder());
        rec.diameter = band.linf_diameter();
      }
    }
  } catch (const Error& e) {
    rec.ok = false;
    rec.covered = false;
    rec.error_kind = e.kind();
    rec.message = e.what();
  } catch (const std::exception& e) {
    rec.ok = false;
    rec.covered = false;
    rec.error_kind = "internal";
    rec.message = e.what();
  }
  return rec;
}

//! Aggregate over records sorted by index: coverage among completed
//! replications with its binomial standard error, coverage counting failures
//! as misses, mean diameter and selection summaries. A pure function of the
//! record set.
inline Json aggregate(const ExperimentConfig& c, std::vector<ReplicationRecord> records)
{
  std::sort(records.begin(), records.end(),
            [](const auto& x, const auto& y) { return x.index < y.index; });
  std::size_t completed = 0;
  std::size_t covered = 0;
  std::size_t image_checked = 0;
  std::size_t image_agree = 0;
  std::size_t diam_count = 0;
  double diam_sum = 0.0;
  std::size_t sel_count = 0;
  std::size_t saturated = 0;
  double s_hat_sum = 0.0;
  std::map<std::string, int> failures;
  std::map<int, int> j_hat_hist;
  for (const auto& r : records) {
    if (!r.ok) {
      ++failures[r.error_kind];
      continue;
    }
    ++completed;
    covered += r.covered ? 1 : 0;
    if (r.covered_image) {
      ++image_checked;
      image_agree += *r.covered_image == r.covered ? 1 : 0;
    }
    if (r.diameter && std::isfinite(*r.diameter)) {
      ++diam_count;
      diam_sum += *r.diameter;
    }
    if (r.J_hat) {
      ++sel_count;
      ++j_hat_hist[*r.J_hat];
      saturated += r.saturated.value_or(false) ? 1 : 0;
      s_hat_sum += r.s_hat.value_or(0.0);
    }
  }
  const double R = static_cast<double>(records.size());
  const double p = completed ? static_cast<double>(covered) / completed : 0.0;
  Json report{ { "schema", kCoverageSchema },
               { "target", c.estimator.target },
               { "method", c.estimator.method },
               { "mode", c.estimator.target == "density"  ? c.band.density_mode
                         : c.estimator.method == "adaptive" ? std::string("adaptive")
                                                            : c.band.drift_mode },
               { "alpha", c.band.alpha },
               { "n", c.sampling.n },
               { "master_seed", c.sampling.seed },
               { "replications", records.size() },
               { "completed", completed },
               { "failed", records.size() - completed },
               { "failures", failures },
               { "covered", covered },
               { "coverage", completed ? Json(p) : Json(nullptr) },
               { "coverage_se",
                 completed ? Json(std::sqrt(p * (1.0 - p) / completed)) : Json(nullptr) },
               { "coverage_all", R > 0 ? Json(covered / R) : Json(nullptr) },
               { "mean_diameter", diam_count ? Json(diam_sum / diam_count) : Json(nullptr) } };
  if (image_checked) {
    report["image_identity"] = { { "checked", image_checked }, { "agree", image_agree } };
  }
  if (sel_count) {
    Json hist = Json::object();
    for (const auto& [J, count] : j_hat_hist) {
      hist[std::to_string(J)] = count;
    }
    report["selection"] = { { "J_hat_counts", hist },
                            { "saturated", saturated },
                            { "mean_s_hat", s_hat_sum / sel_count } };
  }
  return report;
}

struct CoverageOptions
{
  int workers = 1;
  bool resume = false;          ///< keep records already in replications.jsonl
  std::filesystem::path out_dir; ///< empty: nothing is written
  std::function<void(const ReplicationRecord&)> on_record;
};

struct CoverageReport
{
  std::vector<ReplicationRecord> records; ///< sorted by index
  Json summary;
  double runtime_seconds = 0.0;
};

inline std::vector<ReplicationRecord> read_replications(const std::filesystem::path& path)
{
  std::vector<ReplicationRecord> out;
  std::ifstream in(path);
  if (!in) {
    return out;
  }
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) {
      continue;
    }
    try {
      out.push_back(replication_from_json(Json::parse(line)));
    } catch (const nlohmann::json::exception&) {
      // a torn final line from an interrupted run
      break;
    }
  }
  return out;
}

inline std::string utc_timestamp()
{
  const auto t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

//! Runs the configured number of replications on a pool of workers. Each
//! finished record is appended to out_dir/replications.jsonl; the aggregate
//! goes to report.json and timings to metadata.json.
inline CoverageReport run_coverage(const Experiment& ex, const CoverageOptions& opt = {})
{
  const auto& c = ex.config();
  if (c.coverage.replications < 10) {
    throw ConfigError("coverage.replications", "coverage needs at least 10 replications");
  }
  if (opt.workers < 1) {
    throw ConfigError("workers", "must be >= 1");
  }
  const Truth truth(ex);
  const auto R = static_cast<std::uint64_t>(c.coverage.replications);
  const auto started = utc_timestamp();
  const auto t0 = std::chrono::steady_clock::now();

  std::vector<ReplicationRecord> records;
  std::vector<bool> done(R, false);
  const bool write = !opt.out_dir.empty();
  const auto log_path = opt.out_dir / "replications.jsonl";
  if (write) {
    std::filesystem::create_directories(opt.out_dir);
    if (opt.resume) {
      for (auto& r : read_replications(log_path)) {
        if (r.index < R && !done[r.index]) {
          done[r.index] = true;
          records.push_back(std::move(r));
        }
      }
    }
    // rewrite the kept prefix so a torn line cannot survive
    std::ofstream(log_path, std::ios::trunc) << [&] {
      std::string s;
      for (const auto& r : records) {
        s += to_json(r).dump() + "\n";
      }
      return s;
    }();
  }
  std::ofstream log;
  if (write) {
    log.open(log_path, std::ios::app);
    if (!log) {
      throw IoError("cannot append to " + log_path.string());
    }
  }

  std::vector<std::uint64_t> todo;
  for (std::uint64_t i = 0; i < R; ++i) {
    if (!done[i]) {
      todo.push_back(i);
    }
  }
  std::atomic<std::size_t> next{ 0 };
  std::mutex mutex;
  auto work = [&] {
    for (;;) {
      const std::size_t t = next.fetch_add(1);
      if (t >= todo.size()) {
        return;
      }
      auto rec = run_replication(ex, truth, todo[t]);
      std::lock_guard<std::mutex> lock(mutex);
      if (write) {
        log << to_json(rec).dump() << '\n' << std::flush;
      }
      if (opt.on_record) {
        opt.on_record(rec);
      }
      records.push_back(std::move(rec));
    }
  };
  const int workers = std::min<int>(opt.workers, std::max<std::size_t>(1, todo.size()));
  if (workers == 1) {
    work();
  } else {
    std::vector<std::thread> pool;
    for (int w = 0; w < workers; ++w) {
      pool.emplace_back(work);
    }
    for (auto& th : pool) {
      th.join();
    }
  }
  if (log.is_open() && !log) {
    throw IoError("write failed for " + log_path.string());
  }

  CoverageReport report;
  report.summary = aggregate(c, records);
  std::sort(records.begin(), records.end(),
            [](const auto& x, const auto& y) { return x.index < y.index; });
  report.records = std::move(records);
  report.runtime_seconds =
    std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  if (write) {
    write_json(opt.out_dir / "report.json", report.summary);
    write_json(opt.out_dir / "metadata.json",
               Json{ { "started", started },
                     { "finished", utc_timestamp() },
                     { "runtime_seconds", report.runtime_seconds },
                     { "workers", workers },
                     { "resumed_records", R - todo.size() } });
  }
  return report;
}

} // namespace mcband
