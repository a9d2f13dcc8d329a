#pragma once

#include "mcband/adapt.hpp"
#include "mcband/density.hpp"
#include "mcband/drift.hpp"
#include "mcband/errors.hpp"
#include "mcband/simulate.hpp"
#include "mcband/variance.hpp"
#include "mcband/wavelet.hpp"

#include <json.hpp>

#include <charconv>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

namespace mcband {

using Json = nlohmann::ordered_json;

inline constexpr const char* kTrajectorySchema = "mcband.trajectory/1";
inline constexpr const char* kCoeffsSchema = "mcband.coefficients/1";
inline constexpr const char* kDensityBandSchema = "mcband.density-band/1";
inline constexpr const char* kDriftBandSchema = "mcband.drift-band/1";
inline constexpr const char* kCriticalValueSchema = "mcband.critical-value/1";
inline constexpr const char* kAdaptSchema = "mcband.adapt-diagnostics/1";

/// Shortest representation that parses back to the same double.
inline std::string format_double(double x)
{
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, res.ptr);
}

inline std::string read_text(const std::filesystem::path& path)
{
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw IoError("cannot open " + path.string());
  }
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

inline void write_text(const std::filesystem::path& path, const std::string& text)
{
  if (path.has_parent_path()) {
    std::error_code ec;
    std::filesystem::create_directories(path.parent_path(), ec);
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) {
    throw IoError("cannot write " + path.string());
  }
  out << text;
  if (!out) {
    throw IoError("write failed for " + path.string());
  }
}

inline void write_json(const std::filesystem::path& path, const Json& j)
{
  write_text(path, j.dump(2) + "\n");
}

inline Json parse_json(const std::string& text, const std::string& what)
{
  try {
    return Json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw IoError(what + ": " + e.what());
  }
}

// ---------------------------------------------------------------- trajectory

inline std::string trajectory_csv(const Trajectory& t)
{
  std::string out = "# model=" + t.model + ", delta=" + format_double(t.delta) +
                    ", seed=" + std::to_string(t.seed) +
                    ", n=" + std::to_string(t.size()) +
                    ", burn_in=" + std::to_string(t.burn_in_steps) + "\n";
  out.reserve(out.size() + t.size() * 24);
  for (double x : t.samples) {
    out += format_double(x);
    out += '\n';
  }
  return out;
}

inline Json trajectory_json(const Trajectory& t)
{
  return Json{ { "schema", kTrajectorySchema },
               { "model", t.model },
               { "delta", t.delta },
               { "seed", t.seed },
               { "n", t.size() },
               { "burn_in", t.burn_in_steps },
               { "samples", t.samples } };
}

namespace detail {

inline double parse_number(std::string_view s, const std::string& what)
{
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) {
    s.remove_prefix(1);
  }
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) {
    s.remove_suffix(1);
  }
  double v = 0.0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size()) {
    throw IoError(what + ": not a number: '" + std::string(s) + "'");
  }
  return v;
}

/// Splits "k1=v1, k2=v2" at commas that precede a new key. Model
/// descriptors contain ';' but never ", ".
inline std::map<std::string, std::string> parse_header(const std::string& line)
{
  std::map<std::string, std::string> out;
  std::string body = line.substr(1);
  std::size_t pos = 0;
  while (pos < body.size()) {
    std::size_t end = body.find(", ", pos);
    if (end == std::string::npos) {
      end = body.size();
    }
    const std::string item = body.substr(pos, end - pos);
    const auto eq = item.find('=');
    if (eq != std::string::npos) {
      std::string key = item.substr(0, eq);
      key.erase(0, key.find_first_not_of(' '));
      out[key] = item.substr(eq + 1);
    }
    pos = end + 2;
  }
  return out;
}

} // namespace detail

inline Trajectory parse_trajectory_csv(const std::string& text)
{
  Trajectory t;
  std::istringstream in(text);
  std::string line;
  bool header = false;
  long long declared = -1;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line == "\r") {
      continue;
    }
    if (line[0] == '#') {
      if (header) {
        continue;
      }
      header = true;
      const auto kv = detail::parse_header(line);
      if (kv.count("model")) {
        t.model = kv.at("model");
      }
      if (kv.count("delta")) {
        t.delta = detail::parse_number(kv.at("delta"), "header delta");
      }
      if (kv.count("seed")) {
        t.seed = std::stoull(kv.at("seed"));
      }
      if (kv.count("n")) {
        declared = std::stoll(kv.at("n"));
      }
      if (kv.count("burn_in")) {
        t.burn_in_steps = std::stoll(kv.at("burn_in"));
      }
      continue;
    }
    t.samples.push_back(
      detail::parse_number(line, "trajectory line " + std::to_string(line_no)));
  }
  if (declared >= 0 && static_cast<std::size_t>(declared) != t.size()) {
    throw IoError("trajectory: header declares n=" + std::to_string(declared) +
                  " but file has " + std::to_string(t.size()) + " samples");
  }
  return t;
}

inline Trajectory trajectory_from_json(const Json& j)
{
  try {
    Trajectory t;
    t.model = j.value("model", std::string("unknown"));
    t.delta = j.at("delta").get<double>();
    t.seed = j.value("seed", std::uint64_t{ 0 });
    t.burn_in_steps = j.value("burn_in", 0LL);
    t.samples = j.at("samples").get<std::vector<double>>();
    if (j.contains("n") && j.at("n").get<std::size_t>() != t.size()) {
      throw IoError("trajectory: declared n does not match samples");
    }
    return t;
  } catch (const nlohmann::json::exception& e) {
    throw IoError(std::string("trajectory JSON: ") + e.what());
  }
}

/// Reads either format; JSON is recognized by a leading '{'.
inline Trajectory read_trajectory(const std::filesystem::path& path)
{
  const auto text = read_text(path);
  const auto first = text.find_first_not_of(" \t\r\n");
  if (first != std::string::npos && text[first] == '{') {
    return trajectory_from_json(parse_json(text, path.string()));
  }
  return parse_trajectory_csv(text);
}

// -------------------------------------------------------------- coefficients

inline Json coeffs_json(const MultiScaleCoeffs& c)
{
  Json levels = Json::array();
  for (const auto& lv : c.levels()) {
    levels.push_back({ { "j", lv.level }, { "k_min", lv.k_min }, { "values", lv.values } });
  }
  return Json{ { "schema", kCoeffsSchema },
               { "basis",
                 { { "N", c.basis().order() },
                   { "j0", c.basis().base_level() },
                   { "R", c.basis().grid_depth() } } },
               { "interval", { c.a(), c.b() } },
               { "max_level", c.max_level() },
               { "levels", levels } };
}

/// Rebuilds coefficients; the basis is reconstructed from its descriptor
/// unless one with matching order and base level is supplied.
inline MultiScaleCoeffs coeffs_from_json(const Json& j,
                                         const WaveletBasis* basis = nullptr)
{
  try {
    const auto& jb = j.at("basis");
    const int N = jb.at("N").get<int>();
    const int j0 = jb.at("j0").get<int>();
    const int R = jb.value("R", 12);
    WaveletBasis B = (basis && basis->order() == N && basis->base_level() == j0)
                       ? *basis
                       : WaveletBasis(N, j0, R);
    const double a = j.at("interval").at(0).get<double>();
    const double b = j.at("interval").at(1).get<double>();
    int J = j.value("max_level", j0);
    for (const auto& lv : j.at("levels")) {
      J = std::max(J, lv.at("j").get<int>());
    }
    MultiScaleCoeffs c(std::move(B), a, b, J);
    for (const auto& lv : j.at("levels")) {
      auto& dst = c.level(lv.at("j").get<int>());
      if (dst.k_min != lv.at("k_min").get<long>()) {
        throw IoError("coefficients: k_min mismatch at level " +
                      std::to_string(dst.level));
      }
      auto values = lv.at("values").get<std::vector<double>>();
      if (values.size() != dst.values.size()) {
        throw IoError("coefficients: wrong length at level " +
                      std::to_string(dst.level));
      }
      dst.values = std::move(values);
    }
    return c;
  } catch (const nlohmann::json::exception& e) {
    throw IoError(std::string("coefficients JSON: ") + e.what());
  }
}

// --------------------------------------------------------------------- bands

inline Json weights_json(const WeightSequence& w)
{
  return Json{ { "kind", w.kind_name() }, { "scale", w.scale }, { "w_minus1", w.w_minus1 } };
}

inline Json linf_json(const std::optional<LinfInfo>& l)
{
  if (!l) {
    return nullptr;
  }
  return Json{ { "radius", l->radius },
               { "stochastic", l->stochastic },
               { "bias", l->bias },
               { "rate", l->rate },
               { "constant", l->constant },
               { "grid", l->grid_points } };
}

inline Json cap_json(const SmoothnessCap& c)
{
  return Json{ { "s", c.s }, { "u_n", c.u }, { "cap_scale", c.cap_scale } };
}

inline Json density_band_json(const DensityBand& band)
{
  return Json{ { "schema", kDensityBandSchema },
               { "method", "density" },
               { "mode", band_mode_name(band.mode) },
               { "center_coeffs", coeffs_json(band.center.coeffs) },
               { "zeta", band.zeta },
               { "n", band.n() },
               { "multiscale_radius", band.multiscale_radius() },
               { "weights", weights_json(band.weights) },
               { "cap", band.cap ? cap_json(*band.cap) : Json(nullptr) },
               { "linf", linf_json(band.linf) } };
}

inline Json drift_diagnostics_json(const DriftDiagnostics& d)
{
  return Json{ { "floor", d.floor_value },
               { "sup_mu", d.sup_mu },
               { "clipped_nodes", d.clipped_nodes },
               { "quadrature_nodes", d.quadrature_nodes } };
}

inline Json drift_band_json(const DriftBand& band)
{
  Json j{ { "schema", kDriftBandSchema },
          { "method", drift_method_name(band.center.method) },
          { "mode", drift_band_mode_name(band.mode) },
          { "center_coeffs", coeffs_json(band.center.coeffs) },
          { "J", band.center.J },
          { "U", band.center.U },
          { "zeta", band.zeta },
          { "n", band.center.n },
          { "multiscale_radius", band.multiscale_radius() },
          { "weights", weights_json(band.weights) },
          { "cap", cap_json(band.cap) },
          { "linf", linf_json(band.linf) },
          { "positivity", drift_diagnostics_json(band.center.diagnostics) } };
  if (band.density_band) {
    j["density_band"] = density_band_json(*band.density_band);
  }
  return j;
}

inline Json critical_value_json(const CriticalValue& cv)
{
  Json j{ { "schema", kCriticalValueSchema },
          { "alpha", cv.alpha },
          { "zeta", cv.zeta },
          { "construction", cv.construction },
          { "Sigma", cv.sigma },
          { "C", cv.C },
          { "seed", cv.seed ? Json(*cv.seed) : Json(nullptr) } };
  if (cv.replications > 0) {
    j["replications"] = cv.replications;
    j["covariance_model"] = cv.covariance_model;
  }
  return j;
}

inline Json adaptive_json(const AdaptiveBand& ab)
{
  const auto& sel = ab.info.selection;
  Json pairs = Json::array();
  for (const auto& p : sel.pairs) {
    pairs.push_back({ { "J", p.J },
                      { "j", p.j },
                      { "statistic", p.statistic },
                      { "threshold", p.threshold },
                      { "pass", p.pass } });
  }
  return Json{ { "schema", kAdaptSchema },
               { "J_hat", sel.J_hat },
               { "s_hat", sel.s_hat },
               { "v_n", sel.v_n },
               { "saturated", sel.saturated },
               { "J_min", sel.estimates.front().J },
               { "J_max_effective", sel.J_max_effective },
               { "pairs", pairs },
               { "beta", ab.info.beta },
               { "M", ab.info.M },
               { "u_hat", ab.info.u_hat },
               { "t_n", ab.info.t_n },
               { "sigma_drift", ab.info.sigma_drift },
               { "critical_value", critical_value_json(ab.info.critical_value) },
               { "band", drift_band_json(ab.band) } };
}

inline std::string band_rows_csv(const std::vector<BandRow>& rows)
{
  std::string out = "x,center,lower,upper\n";
  for (const auto& r : rows) {
    out += format_double(r.x) + ',' + format_double(r.center) + ',' +
           format_double(r.lower) + ',' + format_double(r.upper) + '\n';
  }
  return out;
}

/// Machine-readable form of an error, as printed by --json-errors.
inline Json error_json(const std::exception& e)
{
  Json j{ { "error", { { "kind", "internal" }, { "message", e.what() }, { "exit_code", 1 } } } };
  if (const auto* err = dynamic_cast<const Error*>(&e)) {
    j["error"]["kind"] = err->kind();
    j["error"]["exit_code"] = err->exit_code();
  }
  if (const auto* ce = dynamic_cast<const ConfigError*>(&e); ce && !ce->field().empty()) {
    j["error"]["field"] = ce->field();
  }
  if (const auto* pe = dynamic_cast<const PositivityError*>(&e)) {
    j["error"]["x_range"] = { pe->x_lo(), pe->x_hi() };
  }
  return j;
}

} // namespace mcband
