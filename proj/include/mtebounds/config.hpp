#pragma once

// Run configuration as JSON. Every object rejects unknown keys. Treatment,
// instrument and covariate indices are 0-based; dimensions of the unit cube
// in shape restrictions are 1-based (u_1, ..., u_J).

#include <cstdint>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"

#include "mtebounds/engine.hpp"

namespace mtebounds {

using json = nlohmann::json;

inline constexpr int kSchemaVersion = 1;

class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

namespace detail {

inline void expect_object(const json& j, const std::string& path) {
  if (!j.is_object()) throw ConfigError(path + ": expected an object");
}

inline void expect_keys(const json& j, const std::string& path, std::initializer_list<const char*> allowed) {
  expect_object(j, path);
  for (auto it = j.begin(); it != j.end(); ++it) {
    bool ok = false;
    for (const char* a : allowed) ok = ok || it.key() == a;
    if (!ok) throw ConfigError(path + ": unknown key '" + it.key() + "'");
  }
}

inline const json& require(const json& j, const char* key, const std::string& path) {
  if (!j.contains(key)) throw ConfigError(path + ": missing key '" + key + "'");
  return j.at(key);
}

template <class T>
T get_as(const json& j, const std::string& path) {
  try {
    return j.get<T>();
  } catch (const json::exception&) {
    throw ConfigError(path + ": value has the wrong type");
  }
}

inline double get_number(const json& j, const std::string& path) {
  if (!j.is_number()) throw ConfigError(path + ": expected a number");
  return j.get<double>();
}

inline std::size_t get_index(const json& j, const std::string& path) {
  if (!j.is_number_unsigned() && !(j.is_number_integer() && j.get<long long>() >= 0)) {
    throw ConfigError(path + ": expected a nonnegative integer");
  }
  return j.get<std::size_t>();
}

template <class T>
T opt_or(const json& j, const char* key, T dflt, const std::string& path) {
  if (!j.contains(key)) return dflt;
  if constexpr (std::is_same_v<T, double>) {
    return get_number(j.at(key), path + "." + key);
  } else if constexpr (std::is_same_v<T, std::size_t>) {
    return get_index(j.at(key), path + "." + key);
  } else {
    return get_as<T>(j.at(key), path + "." + key);
  }
}

inline ModelKind parse_model_kind(const std::string& s, const std::string& path) {
  if (s == "binary") return ModelKind::Binary;
  if (s == "sequential") return ModelKind::Sequential;
  if (s == "double_hurdle") return ModelKind::DoubleHurdle;
  if (s == "multinomial") return ModelKind::Multinomial;
  throw ConfigError(path + ": unknown model kind '" + s + "'");
}

inline Family parse_family(const std::string& s, const std::string& path) {
  for (Family f : {Family::Independence, Family::Gaussian, Family::GaussianMixture, Family::MultinomialProbit,
                   Family::MultinomialProbitMixture}) {
    if (s == to_string(f)) return f;
  }
  throw ConfigError(path + ": unknown distribution family '" + s + "'");
}

inline TargetKind parse_target_kind(const std::string& s, const std::string& path) {
  for (TargetKind k : {TargetKind::ATE, TargetKind::ATT, TargetKind::LATE, TargetKind::LATEGroupProb, TargetKind::PRTE,
                       TargetKind::PRTESubgroupProb, TargetKind::PRTEConditional, TargetKind::PRTEConditionalProb,
                       TargetKind::Custom}) {
    if (s == to_string(k)) return k;
  }
  throw ConfigError(path + ": unknown target kind '" + s + "'");
}

inline Direction parse_direction(const std::string& s, const std::string& path) {
  if (s == "increasing") return Direction::Increasing;
  if (s == "decreasing") return Direction::Decreasing;
  throw ConfigError(path + ": direction must be 'increasing' or 'decreasing'");
}

inline std::size_t parse_dimension(const json& j, std::size_t J, const std::string& path) {
  const std::size_t v = get_index(j, path);
  if (v < 1 || v > J) throw ConfigError(path + ": dimension must lie in 1.." + std::to_string(J));
  return v - 1;
}

inline LambdaPoint parse_lambda(const json& j, const std::string& path) {
  LambdaPoint l;
  if (j.is_number()) {
    l.rhos = {j.get<double>()};
    return l;
  }
  expect_keys(j, path, {"rho", "weights", "rhos"});
  if (j.contains("rho")) {
    if (j.contains("rhos") || j.contains("weights")) throw ConfigError(path + ": give either rho or weights+rhos");
    l.rhos = {get_number(j.at("rho"), path + ".rho")};
    return l;
  }
  l.weights = get_as<std::vector<double>>(require(j, "weights", path), path + ".weights");
  l.rhos = get_as<std::vector<double>>(require(j, "rhos", path), path + ".rhos");
  return l;
}

/// Accepts a number (same shift everywhere), a per-dimension list, or a
/// full [x][z][j] array.
inline PolicyShift parse_shift(const json& j, const SelectionModel& m, const std::string& path) {
  expect_keys(j, path, {"scale", "delta"});
  PolicyShift s = PolicyShift::zero(m);
  const std::string scale = opt_or<std::string>(j, "scale", "normalized", path);
  if (scale == "normalized") {
    s.scale = PolicyShift::Scale::Normalized;
  } else if (scale == "tilde") {
    s.scale = PolicyShift::Scale::Tilde;
  } else {
    throw ConfigError(path + ".scale: must be 'normalized' or 'tilde'");
  }
  const std::size_t J = s.scale == PolicyShift::Scale::Tilde ? 2 : m.dim();
  const json& d = require(j, "delta", path);
  const std::string dp = path + ".delta";
  std::vector<std::vector<std::vector<double>>> delta;
  if (d.is_number()) {
    delta.assign(m.n_x, std::vector<std::vector<double>>(m.n_z, std::vector<double>(J, d.get<double>())));
  } else if (d.is_array() && !d.empty() && d[0].is_number()) {
    auto v = get_as<std::vector<double>>(d, dp);
    if (v.size() != J) throw ConfigError(dp + ": expected " + std::to_string(J) + " components");
    delta.assign(m.n_x, std::vector<std::vector<double>>(m.n_z, v));
  } else {
    delta = get_as<std::vector<std::vector<std::vector<double>>>>(d, dp);
    if (delta.size() != m.n_x) throw ConfigError(dp + ": outer size must equal n_x");
    for (const auto& dx : delta) {
      if (dx.size() != m.n_z) throw ConfigError(dp + ": middle size must equal n_z");
      for (const auto& dz : dx) {
        if (dz.size() != J) throw ConfigError(dp + ": inner size must equal " + std::to_string(J));
      }
    }
  }
  s.delta = std::move(delta);
  return s;
}

}  // namespace detail

/// Parses a run configuration. Throws ConfigError with a path to the
/// offending field.
inline RunConfig parse_config(const json& j) {
  using namespace detail;
  expect_keys(j, "config",
              {"schema_version", "model", "distribution", "target", "restrictions", "basis", "tolerances", "workers",
               "output_dir"});
  const int version = get_as<int>(require(j, "schema_version", "config"), "config.schema_version");
  if (version != kSchemaVersion) {
    throw ConfigError("config.schema_version: unsupported version " + std::to_string(version));
  }
  RunConfig cfg;

  const json& jm = require(j, "model", "config");
  expect_keys(jm, "model", {"kind", "n_z", "n_x", "n_z1", "n_z2", "anchor_z1", "anchor"});
  cfg.model.kind = parse_model_kind(get_as<std::string>(require(jm, "kind", "model"), "model.kind"), "model.kind");
  cfg.model.n_z1 = opt_or<std::size_t>(jm, "n_z1", 0, "model");
  cfg.model.n_z2 = opt_or<std::size_t>(jm, "n_z2", 0, "model");
  const std::size_t default_nz = cfg.model.n_z1 && cfg.model.n_z2 ? cfg.model.n_z1 * cfg.model.n_z2 : 1;
  cfg.model.n_z = opt_or<std::size_t>(jm, "n_z", default_nz, "model");
  cfg.model.n_x = opt_or<std::size_t>(jm, "n_x", 1, "model");
  cfg.model.anchor_z1 = opt_or<std::size_t>(jm, "anchor_z1", 0, "model");
  cfg.model.anchor = opt_or<double>(jm, "anchor", 0.5, "model");
  const std::size_t J = cfg.model.dim();

  const json& jd = require(j, "distribution", "config");
  expect_keys(jd, "distribution", {"family", "lambda_grid", "anchor_grid"});
  cfg.family = parse_family(get_as<std::string>(require(jd, "family", "distribution"), "distribution.family"),
                            "distribution.family");
  cfg.lambdas.clear();
  if (jd.contains("lambda_grid")) {
    const json& g = jd.at("lambda_grid");
    if (!g.is_array()) throw ConfigError("distribution.lambda_grid: expected an array");
    for (std::size_t i = 0; i < g.size(); ++i) {
      cfg.lambdas.push_back(parse_lambda(g[i], "distribution.lambda_grid[" + std::to_string(i) + "]"));
    }
  }
  if (cfg.family == Family::Independence) {
    if (cfg.lambdas.empty()) cfg.lambdas.push_back(LambdaPoint{});
    for (const auto& l : cfg.lambdas) {
      if (!l.rhos.empty() || !l.weights.empty()) {
        throw ConfigError("distribution.lambda_grid: independence takes no parameters");
      }
    }
  }
  if (cfg.lambdas.empty()) throw ConfigError("distribution.lambda_grid: must be nonempty");
  if (jd.contains("anchor_grid")) {
    cfg.anchors = get_as<std::vector<double>>(jd.at("anchor_grid"), "distribution.anchor_grid");
    if (cfg.anchors.empty()) throw ConfigError("distribution.anchor_grid: must be nonempty");
  }

  const json& jt = require(j, "target", "config");
  expect_keys(jt, "target", {"kind", "d1", "d0", "response", "shifts", "terms", "constant"});
  cfg.target.kind = parse_target_kind(get_as<std::string>(require(jt, "kind", "target"), "target.kind"),
                                      "target.kind");
  cfg.target.d1 = opt_or<std::size_t>(jt, "d1", 1, "target");
  cfg.target.d0 = opt_or<std::size_t>(jt, "d0", 0, "target");
  if (jt.contains("response")) {
    const json& r = jt.at("response");
    if (!r.is_array()) throw ConfigError("target.response: expected an array of [z, d] pairs");
    for (std::size_t i = 0; i < r.size(); ++i) {
      const std::string p = "target.response[" + std::to_string(i) + "]";
      if (!r[i].is_array() || r[i].size() != 2) throw ConfigError(p + ": expected [z, d]");
      cfg.target.response.emplace_back(get_index(r[i][0], p), get_index(r[i][1], p));
    }
  }
  if (jt.contains("shifts")) {
    const json& s = jt.at("shifts");
    if (!s.is_array()) throw ConfigError("target.shifts: expected an array");
    for (std::size_t i = 0; i < s.size(); ++i) {
      cfg.target.shifts.push_back(parse_shift(s[i], cfg.model, "target.shifts[" + std::to_string(i) + "]"));
    }
  }
  if (jt.contains("terms")) {
    const json& ts = jt.at("terms");
    if (!ts.is_array()) throw ConfigError("target.terms: expected an array");
    for (std::size_t i = 0; i < ts.size(); ++i) {
      const std::string p = "target.terms[" + std::to_string(i) + "]";
      expect_keys(ts[i], p, {"x", "d", "weight", "regions"});
      CustomTerm t;
      t.x = opt_or<std::size_t>(ts[i], "x", 0, p);
      t.d = get_index(require(ts[i], "d", p), p + ".d");
      t.weight = get_number(require(ts[i], "weight", p), p + ".weight");
      if (ts[i].contains("regions")) {
        const json& rs = ts[i].at("regions");
        if (!rs.is_array()) throw ConfigError(p + ".regions: expected an array");
        for (std::size_t k = 0; k < rs.size(); ++k) {
          const std::string rp = p + ".regions[" + std::to_string(k) + "]";
          expect_keys(rs[k], rp, {"d", "z", "shift"});
          RegionRef ref;
          ref.d = get_index(require(rs[k], "d", rp), rp + ".d");
          ref.z = get_index(require(rs[k], "z", rp), rp + ".z");
          ref.shift = rs[k].contains("shift") ? static_cast<int>(get_index(rs[k].at("shift"), rp + ".shift")) : -1;
          t.refs.push_back(ref);
        }
      }
      cfg.target.custom.push_back(std::move(t));
    }
  }
  cfg.target.custom_constant = opt_or<double>(jt, "constant", 0.0, "target");

  if (j.contains("restrictions")) {
    const json& jr = j.at("restrictions");
    expect_keys(jr, "restrictions", {"bounds", "md", "cm", "um", "cs", "us"});
    auto& r = cfg.restrictions;
    if (jr.contains("bounds")) {
      auto b = get_as<std::vector<double>>(jr.at("bounds"), "restrictions.bounds");
      if (b.size() != 2 || !(b[0] <= b[1])) throw ConfigError("restrictions.bounds: expected [lower, upper]");
      r.bounds = std::pair{b[0], b[1]};
    }
    if (jr.contains("md")) {
      const json& md = jr.at("md");
      if (!md.is_array()) throw ConfigError("restrictions.md: expected an array of [d_hi, d_lo] pairs");
      for (std::size_t i = 0; i < md.size(); ++i) {
        const std::string p = "restrictions.md[" + std::to_string(i) + "]";
        if (!md[i].is_array() || md[i].size() != 2) throw ConfigError(p + ": expected [d_hi, d_lo]");
        r.md.emplace_back(get_index(md[i][0], p), get_index(md[i][1], p));
      }
    }
    for (const char* key : {"cm", "um"}) {
      if (!jr.contains(key)) continue;
      const json& a = jr.at(key);
      const std::string base = std::string("restrictions.") + key;
      if (!a.is_array()) throw ConfigError(base + ": expected an array");
      for (std::size_t i = 0; i < a.size(); ++i) {
        const std::string p = base + "[" + std::to_string(i) + "]";
        expect_keys(a[i], p, {"dim", "direction"});
        const std::size_t dim = parse_dimension(require(a[i], "dim", p), J, p + ".dim");
        const Direction dir =
            parse_direction(get_as<std::string>(require(a[i], "direction", p), p + ".direction"), p + ".direction");
        (std::string(key) == "cm" ? r.cm : r.um).emplace_back(dim, dir);
      }
    }
    for (const char* key : {"cs", "us"}) {
      if (!jr.contains(key)) continue;
      const json& a = jr.at(key);
      const std::string base = std::string("restrictions.") + key;
      if (!a.is_array()) throw ConfigError(base + ": expected an array of dimensions");
      for (std::size_t i = 0; i < a.size(); ++i) {
        const std::size_t dim = parse_dimension(a[i], J, base + "[" + std::to_string(i) + "]");
        (std::string(key) == "cs" ? r.cs : r.us).push_back(dim);
      }
    }
  }

  if (j.contains("basis")) {
    const json& jb = j.at("basis");
    expect_keys(jb, "basis", {"mode", "degree", "grid_points", "refine_rounds"});
    const std::string mode = opt_or<std::string>(jb, "mode", "piecewise", "basis");
    if (mode == "piecewise") {
      cfg.basis.mode = BasisMode::PiecewiseConstant;
    } else if (mode == "bernstein") {
      cfg.basis.mode = BasisMode::Bernstein;
    } else {
      throw ConfigError("basis.mode: must be 'piecewise' or 'bernstein'");
    }
    if (jb.contains("degree")) {
      const json& dg = jb.at("degree");
      if (dg.is_number()) {
        cfg.basis.degree.assign(J, get_index(dg, "basis.degree"));
      } else {
        cfg.basis.degree = get_as<std::vector<std::size_t>>(dg, "basis.degree");
        if (cfg.basis.degree.size() != J) throw ConfigError("basis.degree: expected one degree per dimension");
      }
    }
    cfg.basis.grid_points = opt_or<std::size_t>(jb, "grid_points", 11, "basis");
    if (cfg.basis.grid_points < 2) throw ConfigError("basis.grid_points: must be at least 2");
    cfg.basis.refine_rounds = static_cast<int>(opt_or<std::size_t>(jb, "refine_rounds", 0, "basis"));
  }

  if (j.contains("tolerances")) {
    const json& jt2 = j.at("tolerances");
    expect_keys(jt2, "tolerances",
                {"eps_feas", "merge_tol", "mass_floor", "max_cells", "quad_abs_tol", "quad_rel_tol", "lp_feasibility",
                 "lp_optimality", "lp_pivot", "lp_max_iterations"});
    auto& t = cfg.tol;
    t.eps_feas = opt_or<double>(jt2, "eps_feas", t.eps_feas, "tolerances");
    t.merge_tol = opt_or<double>(jt2, "merge_tol", t.merge_tol, "tolerances");
    t.mass_floor = opt_or<double>(jt2, "mass_floor", t.mass_floor, "tolerances");
    t.max_cells = opt_or<std::size_t>(jt2, "max_cells", t.max_cells, "tolerances");
    t.quad.abs_tol = opt_or<double>(jt2, "quad_abs_tol", t.quad.abs_tol, "tolerances");
    t.quad.rel_tol = opt_or<double>(jt2, "quad_rel_tol", t.quad.rel_tol, "tolerances");
    t.lp.feasibility = opt_or<double>(jt2, "lp_feasibility", t.lp.feasibility, "tolerances");
    t.lp.optimality = opt_or<double>(jt2, "lp_optimality", t.lp.optimality, "tolerances");
    t.lp.pivot = opt_or<double>(jt2, "lp_pivot", t.lp.pivot, "tolerances");
    t.lp.max_iterations = opt_or<std::size_t>(jt2, "lp_max_iterations", t.lp.max_iterations, "tolerances");
  }
  cfg.workers = opt_or<std::size_t>(j, "workers", 1, "config");
  if (cfg.workers == 0) throw ConfigError("config.workers: must be at least 1");
  return cfg;
}

inline json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open '" + path + "'");
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError(path + ": " + e.what());
  }
}

/// Parses "r" (single rho) or "w1,w2:r1,r2" (mixture) on the command line.
inline LambdaPoint parse_lambda_text(const std::string& s) {
  auto numbers = [&](const std::string& part) {
    std::vector<double> v;
    std::stringstream ss(part);
    std::string tok;
    while (std::getline(ss, tok, ',')) {
      std::size_t used = 0;
      double x = 0.0;
      try {
        x = std::stod(tok, &used);
      } catch (const std::exception&) {
        used = 0;
      }
      if (used == 0 || used != tok.size()) throw ConfigError("--lambda: cannot parse '" + s + "'");
      v.push_back(x);
    }
    return v;
  };
  LambdaPoint l;
  if (s.empty() || s == "none") return l;
  const auto colon = s.find(':');
  if (colon == std::string::npos) {
    l.rhos = numbers(s);
    if (l.rhos.size() != 1) throw ConfigError("--lambda: a single rho or 'weights:rhos' expected");
  } else {
    l.weights = numbers(s.substr(0, colon));
    l.rhos = numbers(s.substr(colon + 1));
  }
  return l;
}

/// 64-bit FNV-1a digest as 16 hex digits.
inline std::string fnv1a_hex(const std::string& data) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : data) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

/// Digest of the configuration (without the worker count and output
/// directory, which do not affect results) and the moments.
inline std::string config_hash(json config, const json& moments) {
  config.erase("workers");
  config.erase("output_dir");
  return fnv1a_hex(config.dump() + "\n" + moments.dump());
}

}  // namespace mtebounds
