#pragma once

#include "mcband/errors.hpp"
#include "mcband/io.hpp"

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include <cstdint>
#include <filesystem>
#include <set>
#include <sstream>
#include <string>

namespace mcband {

//! One experiment: model, sampling, basis, estimator, band and harness
//! settings. Stored as an INI file with one section per group; every key is
//! written out, so a parsed-and-rewritten file is a fixed point.
struct ExperimentConfig
{
  struct Model
  {
    std::string family = "ou"; ///< ou | selfsim | brownian
    double theta = 1.0;
    double sigma = 1.0;
    double s = 1.0;            ///< selfsim only
    double x_jump = 0.0;       ///< selfsim only
    double amplitude = 0.5;    ///< selfsim only
    bool operator==(const Model&) const = default;
  } model;

  struct Sampling
  {
    std::uint64_t n = 20000;
    double delta = 1.0;
    int substeps = 0;               ///< 0: max(16, ceil(delta / 0.01))
    std::uint64_t seed = 42;
    std::string sampler = "exact";  ///< exact (OU only) | euler
    double x0 = 0.0;
    bool stationary_start = true;   ///< exact sampler only
    long long burn_in = kDefaultBurnIn;
    bool operator==(const Sampling&) const = default;
  } sampling;

  struct Basis
  {
    int N = 8;
    int j0 = 3;
    int R = 12;
    bool operator==(const Basis&) const = default;
  } basis;

  double a = -1.0;
  double b = 1.0;

  struct Estimator
  {
    std::string target = "density";     ///< density | drift
    std::string method = "plugin";      ///< plugin | direct | adaptive (drift)
    int J = -1;                         ///< -1: resolution schedule
    double s = 1.0;                     ///< regularity used by the schedule and cap
    std::string schedule = "diffusion"; ///< chain | diffusion (density target)
    int U = -1;                         ///< -1: ceil(log2 log n)
    double positivity_factor = kDefaultPositivityFactor;
    bool operator==(const Estimator&) const = default;
  } estimator;

  struct Band
  {
    double alpha = 0.1;
    std::string zeta_method = "gaussian-bound"; ///< gaussian-bound | mc-quantile
    double zeta = 0.0;                          ///< > 0 overrides the estimate
    std::string density_mode = "with-smoothness-cap";
    std::string drift_mode = "E_n";             ///< E_n | D_n
    double cap_scale = 1.0;
    double weight_scale = 1.0;
    int mc_replications = 10000;
    int grid_points = 1025;
    bool operator==(const Band&) const = default;
  } band;

  struct Lepski
  {
    double r_max = 2.0;
    double K = 12.0;
    int M = 3;
    int min_span = 3;
    bool operator==(const Lepski&) const = default;
  } lepski;

  struct Coverage
  {
    int replications = 200;
    int workers = 1;
    bool operator==(const Coverage&) const = default;
  } coverage;

  std::string output_dir = "out";

  bool operator==(const ExperimentConfig&) const = default;
};

namespace detail {

using Tree = boost::property_tree::ptree;

inline const std::set<std::string>& known_keys()
{
  static const std::set<std::string> keys = {
    "model.family", "model.theta", "model.sigma", "model.s", "model.x_jump",
    "model.amplitude",
    "sampling.n", "sampling.delta", "sampling.substeps", "sampling.seed",
    "sampling.sampler", "sampling.x0", "sampling.stationary_start",
    "sampling.burn_in",
    "basis.N", "basis.j0", "basis.R",
    "interval.a", "interval.b",
    "estimator.target", "estimator.method", "estimator.J", "estimator.s",
    "estimator.schedule", "estimator.U", "estimator.positivity_factor",
    "band.alpha", "band.zeta_method", "band.zeta", "band.density_mode",
    "band.drift_mode", "band.cap_scale", "band.weight_scale",
    "band.mc_replications", "band.grid_points",
    "lepski.r_max", "lepski.K", "lepski.M", "lepski.min_span",
    "coverage.replications", "coverage.workers",
    "output.dir",
  };
  return keys;
}

template<class T>
void read_key(const Tree& t, const std::string& key, T& out)
{
  const auto v = t.get_optional<std::string>(key);
  if (!v) {
    return;
  }
  if constexpr (std::is_same_v<T, std::string>) {
    out = *v;
  } else if constexpr (std::is_same_v<T, bool>) {
    if (*v == "true" || *v == "1") {
      out = true;
    } else if (*v == "false" || *v == "0") {
      out = false;
    } else {
      throw ConfigError(key, "expected true or false, got '" + *v + "'");
    }
  } else if constexpr (std::is_floating_point_v<T>) {
    out = parse_number(*v, key);
  } else {
    T x{};
    const auto* first = v->data();
    const auto* last = v->data() + v->size();
    const auto res = std::from_chars(first, last, x);
    if (res.ec != std::errc() || res.ptr != last) {
      throw ConfigError(key, "expected an integer, got '" + *v + "'");
    }
    out = x;
  }
}

template<class T>
std::string show(const T& v)
{
  if constexpr (std::is_same_v<T, std::string>) {
    return v;
  } else if constexpr (std::is_same_v<T, bool>) {
    return v ? "true" : "false";
  } else if constexpr (std::is_floating_point_v<T>) {
    return format_double(v);
  } else {
    return std::to_string(v);
  }
}

template<class F>
void visit_fields(ExperimentConfig& c, F&& f)
{
  f("model.family", c.model.family);
  f("model.theta", c.model.theta);
  f("model.sigma", c.model.sigma);
  f("model.s", c.model.s);
  f("model.x_jump", c.model.x_jump);
  f("model.amplitude", c.model.amplitude);
  f("sampling.n", c.sampling.n);
  f("sampling.delta", c.sampling.delta);
  f("sampling.substeps", c.sampling.substeps);
  f("sampling.seed", c.sampling.seed);
  f("sampling.sampler", c.sampling.sampler);
  f("sampling.x0", c.sampling.x0);
  f("sampling.stationary_start", c.sampling.stationary_start);
  f("sampling.burn_in", c.sampling.burn_in);
  f("basis.N", c.basis.N);
  f("basis.j0", c.basis.j0);
  f("basis.R", c.basis.R);
  f("interval.a", c.a);
  f("interval.b", c.b);
  f("estimator.target", c.estimator.target);
  f("estimator.method", c.estimator.method);
  f("estimator.J", c.estimator.J);
  f("estimator.s", c.estimator.s);
  f("estimator.schedule", c.estimator.schedule);
  f("estimator.U", c.estimator.U);
  f("estimator.positivity_factor", c.estimator.positivity_factor);
  f("band.alpha", c.band.alpha);
  f("band.zeta_method", c.band.zeta_method);
  f("band.zeta", c.band.zeta);
  f("band.density_mode", c.band.density_mode);
  f("band.drift_mode", c.band.drift_mode);
  f("band.cap_scale", c.band.cap_scale);
  f("band.weight_scale", c.band.weight_scale);
  f("band.mc_replications", c.band.mc_replications);
  f("band.grid_points", c.band.grid_points);
  f("lepski.r_max", c.lepski.r_max);
  f("lepski.K", c.lepski.K);
  f("lepski.M", c.lepski.M);
  f("lepski.min_span", c.lepski.min_span);
  f("coverage.replications", c.coverage.replications);
  f("coverage.workers", c.coverage.workers);
  f("output.dir", c.output_dir);
}

inline void require(bool ok, const std::string& field, const std::string& msg)
{
  if (!ok) {
    throw ConfigError(field, msg);
  }
}

inline void require_one_of(const std::string& value,
                           std::initializer_list<const char*> allowed,
                           const std::string& field)
{
  for (const char* a : allowed) {
    if (value == a) {
      return;
    }
  }
  std::string list;
  for (const char* a : allowed) {
    list += list.empty() ? a : std::string(" | ") + a;
  }
  throw ConfigError(field, "expected one of " + list + ", got '" + value + "'");
}

} // namespace detail

/// Checks every setting up front; throws ConfigError naming the field.
inline void validate(const ExperimentConfig& c)
{
  using detail::require;
  using detail::require_one_of;
  require_one_of(c.model.family, { "ou", "selfsim", "brownian" }, "model.family");
  require(c.model.theta > 0.0, "model.theta", "must be > 0");
  require(c.model.sigma > 0.0, "model.sigma", "must be > 0");
  if (c.model.family == "selfsim") {
    require(c.model.s >= 1.0 && c.model.s <= 8.0 && c.model.s == std::floor(c.model.s),
            "model.s", "self-similar drift needs an integer s in [1, 8]");
    require(c.model.sigma == 1.0, "model.sigma", "self-similar drifts use sigma = 1");
  }
  require(c.sampling.n >= 1, "sampling.n", "must be >= 1");
  require(c.sampling.delta > 0.0, "sampling.delta", "must be > 0");
  require(c.sampling.substeps >= 0, "sampling.substeps", "must be >= 0");
  require(c.sampling.burn_in >= 0, "sampling.burn_in", "must be >= 0");
  require_one_of(c.sampling.sampler, { "exact", "euler" }, "sampling.sampler");
  require(c.sampling.sampler != "exact" || c.model.family == "ou", "sampling.sampler",
          "the exact sampler is only available for the OU model");
  require(c.basis.N >= 1 && c.basis.N <= 40, "basis.N", "must be in [1, 40]");
  require(c.basis.j0 >= 1, "basis.j0", "must be >= 1");
  require(c.basis.R >= 4 && c.basis.R <= 20, "basis.R", "must be in [4, 20]");
  require(std::isfinite(c.a) && std::isfinite(c.b) && c.a < c.b, "interval",
          "need finite a < b");
  require_one_of(c.estimator.target, { "density", "drift" }, "estimator.target");
  require_one_of(c.estimator.method, { "plugin", "direct", "adaptive" }, "estimator.method");
  require_one_of(c.estimator.schedule, { "chain", "diffusion" }, "estimator.schedule");
  require(c.estimator.J == -1 || c.estimator.J >= c.basis.j0, "estimator.J",
          "must be -1 (schedule) or >= j0");
  require(c.estimator.s > 0.0, "estimator.s", "must be > 0");
  require(c.estimator.U == -1 || c.estimator.U >= 1, "estimator.U",
          "must be -1 (default) or >= 1");
  require(c.estimator.positivity_factor > 0.0 && c.estimator.positivity_factor < 1.0,
          "estimator.positivity_factor", "must be in (0, 1)");
  if (c.estimator.target == "drift") {
    require(c.basis.N >= 3, "basis.N", "drift estimation needs N >= 3");
    require(c.model.sigma == 1.0, "model.sigma", "drift estimation assumes sigma = 1");
    require(std::floor(c.estimator.s) < c.basis.N, "estimator.s",
            "floor(s) must be below the number of vanishing moments");
  }
  require(c.band.alpha > 0.0 && c.band.alpha < 1.0, "band.alpha", "must be in (0, 1)");
  require_one_of(c.band.zeta_method, { "gaussian-bound", "mc-quantile" }, "band.zeta_method");
  require(c.band.zeta >= 0.0, "band.zeta", "must be >= 0 (0 estimates it)");
  require_one_of(c.band.density_mode, { "multiscale", "with-smoothness-cap", "linf" },
                 "band.density_mode");
  require_one_of(c.band.drift_mode, { "E_n", "D_n" }, "band.drift_mode");
  require(c.band.cap_scale > 0.0, "band.cap_scale", "must be > 0");
  require(c.band.weight_scale > 0.0, "band.weight_scale", "must be > 0");
  require(c.band.mc_replications >= 1000, "band.mc_replications", "must be >= 1000");
  require(c.band.grid_points >= 2, "band.grid_points", "must be >= 2");
  require(c.lepski.r_max > 1.0, "lepski.r_max", "must be > 1");
  require(c.lepski.K > 0.0, "lepski.K", "must be > 0");
  require(c.lepski.M >= 1, "lepski.M", "must be >= 1");
  require(c.lepski.min_span >= 1, "lepski.min_span", "must be >= 1");
  require(c.coverage.replications >= 1, "coverage.replications", "must be >= 1");
  require(c.coverage.workers >= 1, "coverage.workers", "must be >= 1");
  require(!c.output_dir.empty(), "output.dir", "must not be empty");
}

inline ExperimentConfig parse_config(const std::string& text)
{
  detail::Tree tree;
  std::istringstream in(text);
  try {
    boost::property_tree::ini_parser::read_ini(in, tree);
  } catch (const boost::property_tree::ini_parser_error& e) {
    throw ConfigError("config", e.message() + " at line " + std::to_string(e.line()));
  }
  for (const auto& [section, body] : tree) {
    if (body.empty()) {
      throw ConfigError(section, "key outside of a section");
    }
    for (const auto& kv : body) {
      const std::string key = section + "." + kv.first;
      if (!detail::known_keys().count(key)) {
        throw ConfigError(key, "unknown key");
      }
    }
  }
  ExperimentConfig c;
  detail::visit_fields(c, [&tree](const std::string& key, auto& field) {
    detail::read_key(tree, key, field);
  });
  validate(c);
  return c;
}

inline ExperimentConfig read_config(const std::filesystem::path& path)
{
  return parse_config(read_text(path));
}

inline std::string config_text(ExperimentConfig c)
{
  std::string out;
  std::string section;
  detail::visit_fields(c, [&](const std::string& key, auto& field) {
    const auto dot = key.find('.');
    const auto sec = key.substr(0, dot);
    if (sec != section) {
      out += (section.empty() ? "[" : "\n[") + sec + "]\n";
      section = sec;
    }
    out += key.substr(dot + 1) + " = " + detail::show(field) + "\n";
  });
  return out;
}

} // namespace mcband
