#pragma once

// Moment tables as JSON, microdata CSV ingestion, and run validation.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"

#include "mtebounds/config.hpp"
#include "mtebounds/moments.hpp"

namespace mtebounds {

class DataError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

inline json moments_to_json(const MomentTable& m) {
  json j = json::object();
  j["schema_version"] = kSchemaVersion;
  j["n_d"] = m.n_d;
  j["n_z"] = m.n_z;
  j["n_x"] = m.n_x;
  if (m.n_z1 || m.n_z2) {
    j["n_z1"] = m.n_z1;
    j["n_z2"] = m.n_z2;
  }
  j["d_labels"] = m.d_labels;
  j["z_labels"] = m.z_labels;
  j["x_labels"] = m.x_labels;
  j["p"] = m.p;
  j["e"] = m.e;
  j["w"] = m.w;
  return j;
}

/// Reads a moment table. Shapes are checked here; probability invariants
/// are left to MomentTable::problems so validation can report all of them.
inline MomentTable moments_from_json(const json& j) {
  using namespace detail;
  try {
    expect_keys(j, "moments",
                {"schema_version", "n_d", "n_z", "n_x", "n_z1", "n_z2", "d_labels", "z_labels", "x_labels", "p", "e",
                 "w"});
    const int version = get_as<int>(require(j, "schema_version", "moments"), "moments.schema_version");
    if (version != kSchemaVersion) {
      throw ConfigError("moments.schema_version: unsupported version " + std::to_string(version));
    }
    MomentTable m;
    m.n_d = get_index(require(j, "n_d", "moments"), "moments.n_d");
    m.n_z = get_index(require(j, "n_z", "moments"), "moments.n_z");
    m.n_x = get_index(require(j, "n_x", "moments"), "moments.n_x");
    m.n_z1 = opt_or<std::size_t>(j, "n_z1", 0, "moments");
    m.n_z2 = opt_or<std::size_t>(j, "n_z2", 0, "moments");
    using V3 = std::vector<std::vector<std::vector<double>>>;
    m.p = get_as<V3>(require(j, "p", "moments"), "moments.p");
    m.e = get_as<V3>(require(j, "e", "moments"), "moments.e");
    if (j.contains("w")) {
      m.w = get_as<std::vector<std::vector<double>>>(j.at("w"), "moments.w");
    } else {
      m.w.assign(m.n_x, std::vector<double>(m.n_z, 1.0 / static_cast<double>(m.n_x * m.n_z)));
    }
    m.d_labels = opt_or<std::vector<std::string>>(j, "d_labels", {}, "moments");
    m.z_labels = opt_or<std::vector<std::string>>(j, "z_labels", {}, "moments");
    m.x_labels = opt_or<std::vector<std::string>>(j, "x_labels", {}, "moments");
    m.default_labels();
    if (m.d_labels.size() != m.n_d || m.z_labels.size() != m.n_z || m.x_labels.size() != m.n_x) {
      throw ConfigError("moments: label lists do not match the declared supports");
    }
    return m;
  } catch (const ConfigError& e) {
    throw DataError(e.what());
  }
}

inline void write_text_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot open '" + path + "' for writing");
  out << text;
  out.flush();
  if (!out) throw DataError("write to '" + path + "' failed");
}

inline void write_moments(const std::string& path, const MomentTable& m) {
  write_text_file(path, moments_to_json(m).dump(2) + "\n");
}

namespace detail {

/// Neumaier compensated sum, so per-cell totals do not depend on row order
/// beyond the last bit of a double.
struct CompensatedSum {
  double sum = 0.0;
  double c = 0.0;
  void add(double v) {
    const double t = sum + v;
    if (std::abs(sum) >= std::abs(v)) {
      c += (sum - t) + v;
    } else {
      c += (v - t) + sum;
    }
    sum = t;
  }
  double value() const { return sum + c; }
};

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char ch = line[i];
    if (quoted) {
      if (ch == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        cur += '"';
        ++i;
      } else if (ch == '"') {
        quoted = false;
      } else {
        cur += ch;
      }
    } else if (ch == '"') {
      quoted = true;
    } else if (ch == ',') {
      out.push_back(cur);
      cur.clear();
    } else if (ch != '\r') {
      cur += ch;
    }
  }
  out.push_back(cur);
  for (auto& s : out) {
    const auto b = s.find_first_not_of(" \t");
    const auto e = s.find_last_not_of(" \t");
    s = b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
  }
  return out;
}

/// Orders category labels numerically when they all parse as numbers.
inline void sort_labels(std::vector<std::string>& v) {
  auto num = [](const std::string& s, double& out) {
    std::size_t used = 0;
    try {
      out = std::stod(s, &used);
    } catch (const std::exception&) {
      return false;
    }
    return used == s.size();
  };
  bool numeric = true;
  double tmp = 0.0;
  for (const auto& s : v) numeric = numeric && num(s, tmp);
  if (numeric) {
    std::sort(v.begin(), v.end(), [&](const std::string& a, const std::string& b) {
      double x = 0.0, y = 0.0;
      num(a, x);
      num(b, y);
      return x < y || (x == y && a < b);
    });
  } else {
    std::sort(v.begin(), v.end());
  }
}

}  // namespace detail

/// Declared category supports; an empty list means "infer from the data".
struct Supports {
  std::vector<std::string> d, z, z1, z2, x;
};

/// Builds moments from microdata with header columns y, d and either z or
/// (z1, z2), plus an optional x. Choice probabilities are count ratios;
/// outcome sums use compensated summation before the division.
inline MomentTable moments_from_microdata(std::istream& in, Supports sup = {}) {
  std::string line;
  if (!std::getline(in, line)) throw DataError("microdata: empty input");
  const auto header = detail::split_csv_line(line);
  std::map<std::string, std::size_t> col;
  for (std::size_t i = 0; i < header.size(); ++i) {
    if (col.count(header[i])) throw DataError("microdata: duplicate column '" + header[i] + "'");
    col[header[i]] = i;
  }
  for (const auto& h : header) {
    if (h != "y" && h != "d" && h != "z" && h != "z1" && h != "z2" && h != "x") {
      throw DataError("microdata: unknown column '" + h + "'");
    }
  }
  if (!col.count("y") || !col.count("d")) throw DataError("microdata: columns y and d are required");
  const bool factored = col.count("z1") || col.count("z2");
  if (factored && (!col.count("z1") || !col.count("z2") || col.count("z"))) {
    throw DataError("microdata: give either z or both z1 and z2");
  }
  if (!factored && !col.count("z")) throw DataError("microdata: instrument column z (or z1, z2) is required");
  const bool has_x = col.count("x") > 0;

  struct Row {
    double y;
    std::string d, z1, z2, x;
    std::size_t line;
  };
  std::vector<Row> rows;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const auto f = detail::split_csv_line(line);
    if (f.size() != header.size()) {
      throw DataError("microdata: row " + std::to_string(lineno) + " has " + std::to_string(f.size()) +
                      " fields, expected " + std::to_string(header.size()));
    }
    Row r;
    r.line = lineno;
    std::size_t used = 0;
    const std::string& ys = f[col["y"]];
    try {
      r.y = std::stod(ys, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used == 0 || used != ys.size() || !std::isfinite(r.y)) {
      throw DataError("microdata: row " + std::to_string(lineno) + ": y is not a finite number");
    }
    r.d = f[col["d"]];
    r.z1 = factored ? f[col["z1"]] : f[col["z"]];
    r.z2 = factored ? f[col["z2"]] : std::string();
    r.x = has_x ? f[col["x"]] : std::string("0");
    rows.push_back(std::move(r));
  }
  if (rows.empty()) throw DataError("microdata: no data rows");

  auto support = [&](std::vector<std::string> declared, auto member, const char* name) {
    if (!declared.empty()) {
      for (const auto& r : rows) {
        if (std::find(declared.begin(), declared.end(), r.*member) == declared.end()) {
          throw DataError(std::string("microdata: row ") + std::to_string(r.line) + ": unknown " + name + " value '" +
                          r.*member + "'");
        }
      }
      return declared;
    }
    std::vector<std::string> v;
    for (const auto& r : rows) v.push_back(r.*member);
    detail::sort_labels(v);
    v.erase(std::unique(v.begin(), v.end()), v.end());
    return v;
  };
  // Integer treatment codes default to the support 0..max(1, largest code),
  // so a treatment absent from the sample still gets probability zero.
  std::vector<std::string> dl;
  if (sup.d.empty()) {
    long max_code = 1;
    bool integer = true;
    for (const auto& r : rows) {
      std::size_t used = 0;
      long v = -1;
      try {
        v = std::stol(r.d, &used);
      } catch (const std::exception&) {
        used = 0;
      }
      if (used == 0 || used != r.d.size() || v < 0 || v > 1000) {
        integer = false;
        break;
      }
      max_code = std::max(max_code, v);
    }
    if (integer) {
      for (long v = 0; v <= max_code; ++v) dl.push_back(std::to_string(v));
    } else {
      dl = support({}, &Row::d, "d");
    }
  } else {
    dl = support(sup.d, &Row::d, "d");
  }
  const auto z1l = support(factored ? sup.z1 : sup.z, &Row::z1, factored ? "z1" : "z");
  const auto z2l = factored ? support(sup.z2, &Row::z2, "z2") : std::vector<std::string>{""};
  const auto xl = support(sup.x, &Row::x, "x");
  auto index_of = [](const std::vector<std::string>& v, const std::string& s) {
    return static_cast<std::size_t>(std::find(v.begin(), v.end(), s) - v.begin());
  };

  MomentTable m = MomentTable::zeros(dl.size(), z1l.size() * z2l.size(), xl.size());
  if (factored) {
    m.n_z1 = z1l.size();
    m.n_z2 = z2l.size();
  }
  m.d_labels = dl;
  m.x_labels = xl;
  m.z_labels.clear();
  for (const auto& a : z1l) {
    for (const auto& b : z2l) m.z_labels.push_back(factored ? a + ":" + b : a);
  }

  std::vector<std::vector<std::size_t>> n_xz(m.n_x, std::vector<std::size_t>(m.n_z, 0));
  std::vector<std::vector<std::vector<std::size_t>>> n_xzd(
      m.n_x, std::vector<std::vector<std::size_t>>(m.n_z, std::vector<std::size_t>(m.n_d, 0)));
  std::vector<std::vector<std::vector<detail::CompensatedSum>>> s_xzd(
      m.n_x, std::vector<std::vector<detail::CompensatedSum>>(m.n_z, std::vector<detail::CompensatedSum>(m.n_d)));
  for (const auto& r : rows) {
    const std::size_t x = index_of(xl, r.x);
    const std::size_t z = index_of(z1l, r.z1) * z2l.size() + index_of(z2l, r.z2);
    const std::size_t d = index_of(dl, r.d);
    ++n_xz[x][z];
    ++n_xzd[x][z][d];
    s_xzd[x][z][d].add(r.y);
  }
  std::vector<std::string> missing;
  for (std::size_t x = 0; x < m.n_x; ++x) {
    for (std::size_t z = 0; z < m.n_z; ++z) {
      if (n_xz[x][z] == 0) missing.push_back("(z=" + m.z_labels[z] + ", x=" + m.x_labels[x] + ")");
    }
  }
  if (!missing.empty()) {
    std::string msg = "microdata: empty cells";
    for (const auto& s : missing) msg += " " + s;
    throw DataError(msg);
  }
  const double n = static_cast<double>(rows.size());
  for (std::size_t x = 0; x < m.n_x; ++x) {
    for (std::size_t z = 0; z < m.n_z; ++z) {
      const double nc = static_cast<double>(n_xz[x][z]);
      m.w[x][z] = nc / n;
      for (std::size_t d = 0; d < m.n_d; ++d) {
        m.p[x][z][d] = static_cast<double>(n_xzd[x][z][d]) / nc;
        m.e[x][z][d] = s_xzd[x][z][d].value() / nc;
      }
    }
  }
  return m;
}

struct ValidationReport {
  std::vector<std::string> errors;
  std::vector<std::string> warnings;
  bool ok() const { return errors.empty(); }
};

/// Checks moment invariants, model requirements and cross-references. Never
/// modifies its inputs.
inline ValidationReport validate(const RunConfig& cfg, const MomentTable& m) {
  ValidationReport r;
  r.errors = m.problems();
  const auto& md = cfg.model;
  try {
    md.check();
  } catch (const SelectionError& e) {
    r.errors.push_back(e.what());
  }
  if (m.n_d != md.n_d()) {
    r.errors.push_back(std::string(to_string(md.kind)) + " model needs " + std::to_string(md.n_d()) +
                       " treatments, moments have " + std::to_string(m.n_d));
  }
  if (m.n_z != md.n_z) {
    r.errors.push_back("instrument support mismatch: config n_z=" + std::to_string(md.n_z) +
                       ", moments n_z=" + std::to_string(m.n_z));
  }
  if (m.n_x != md.n_x) {
    r.errors.push_back("covariate support mismatch: config n_x=" + std::to_string(md.n_x) +
                       ", moments n_x=" + std::to_string(m.n_x));
  }
  if (md.kind == ModelKind::DoubleHurdle && (m.n_z1 != md.n_z1 || m.n_z2 != md.n_z2)) {
    r.errors.push_back("double hurdle: moments must carry the instrument factorization n_z1 x n_z2 of the config");
  }

  const bool multinomial_family =
      cfg.family == Family::MultinomialProbit || cfg.family == Family::MultinomialProbitMixture;
  if ((md.kind == ModelKind::Multinomial) != multinomial_family) {
    r.errors.push_back(std::string("distribution family ") + to_string(cfg.family) + " does not fit the " +
                       to_string(md.kind) + " model");
  }
  if ((cfg.family == Family::Gaussian || cfg.family == Family::GaussianMixture) && md.dim() != 2) {
    r.errors.push_back("gaussian copula families need a two-dimensional model");
  }
  for (std::size_t i = 0; i < cfg.lambdas.size(); ++i) {
    try {
      (void)make_distribution(cfg.family, cfg.lambdas[i], family_dimension(cfg.family, md.dim()));
    } catch (const std::exception& e) {
      r.errors.push_back("lambda_grid[" + std::to_string(i) + "]: " + e.what());
    }
  }
  if (!cfg.anchors.empty() && md.kind != ModelKind::DoubleHurdle) {
    r.warnings.push_back("anchor_grid is ignored outside the double hurdle model");
  }
  for (double a : cfg.anchors) {
    if (!(a >= 0.0 && a <= 1.0)) r.errors.push_back("anchor_grid: values must lie in [0,1]");
  }

  if (auto msg = check_target(cfg.target, md); !msg.empty()) r.errors.push_back(msg);

  const std::size_t nd = md.n_d();
  for (const auto& [hi, lo] : cfg.restrictions.md) {
    if (hi >= nd || lo >= nd || hi == lo) r.errors.push_back("restrictions.md: invalid treatment pair");
  }
  if (cfg.basis.mode == BasisMode::Bernstein && !cfg.basis.degree.empty() && cfg.basis.degree.size() != md.dim()) {
    r.errors.push_back("basis.degree: expected one degree per dimension");
  }
  if (cfg.basis.mode == BasisMode::PiecewiseConstant &&
      (!cfg.restrictions.cm.empty() || !cfg.restrictions.cs.empty())) {
    r.warnings.push_back(
        "piecewise-constant bounds are sharp only under bounds, MD, UM and US restrictions; CM and CS are imposed "
        "as valid outer restrictions");
  }
  return r;
}

}  // namespace mtebounds
