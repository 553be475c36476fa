#pragma once

// Linear programs over bounded variables, a two-phase revised simplex
// solver, and CPLEX LP text serialization.

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstddef>
#include <cstdio>
#include <limits>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace mtebounds {

class LpError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

struct LpTerm {
  std::size_t var;
  double coef;
};

struct LpRow {
  std::string name;
  std::vector<LpTerm> terms;
  double rhs = 0.0;
};

class LinearProgram {
 public:
  enum class Sense { Minimize, Maximize };

  Sense sense = Sense::Minimize;
  std::vector<double> c;
  std::vector<double> lower, upper;
  std::vector<std::string> names;
  std::vector<LpRow> eq;  // terms = rhs
  std::vector<LpRow> le;  // terms <= rhs

  std::size_t num_vars() const { return c.size(); }

  std::size_t add_variable(std::string name, double lo = 0.0, double hi = std::numeric_limits<double>::infinity(),
                           double cost = 0.0) {
    if (lo > hi) throw LpError("add_variable: lower bound exceeds upper bound for " + name);
    c.push_back(cost);
    lower.push_back(lo);
    upper.push_back(hi);
    names.push_back(std::move(name));
    return c.size() - 1;
  }

  void add_eq(std::vector<LpTerm> terms, double rhs, std::string name = {}) {
    if (name.empty()) name = "e" + std::to_string(eq.size());
    eq.push_back({std::move(name), std::move(terms), rhs});
  }

  void add_le(std::vector<LpTerm> terms, double rhs, std::string name = {}) {
    if (name.empty()) name = "l" + std::to_string(le.size());
    le.push_back({std::move(name), std::move(terms), rhs});
  }

  void add_ge(std::vector<LpTerm> terms, double rhs, std::string name = {}) {
    for (auto& t : terms) t.coef = -t.coef;
    add_le(std::move(terms), -rhs, std::move(name));
  }

  /// Throws LpError when sizes disagree, indices are out of range or
  /// numbers are not finite.
  void check() const {
    const std::size_t n = c.size();
    if (lower.size() != n || upper.size() != n || names.size() != n) {
      throw LpError("linear program: objective, bounds and names must have one entry per variable");
    }
    for (std::size_t j = 0; j < n; ++j) {
      if (!std::isfinite(c[j])) throw LpError("linear program: objective coefficient is not finite");
      if (std::isnan(lower[j]) || std::isnan(upper[j]) || lower[j] > upper[j] || lower[j] == kInfinity ||
          upper[j] == -kInfinity) {
        throw LpError("linear program: invalid bounds for variable " + names[j]);
      }
    }
    for (const auto* block : {&eq, &le}) {
      for (const auto& row : *block) {
        if (!std::isfinite(row.rhs)) throw LpError("linear program: right-hand side is not finite in " + row.name);
        for (const auto& t : row.terms) {
          if (t.var >= n) throw LpError("linear program: variable index out of range in " + row.name);
          if (!std::isfinite(t.coef)) throw LpError("linear program: coefficient is not finite in " + row.name);
        }
      }
    }
  }

  double objective_value(const std::vector<double>& x) const {
    double v = 0.0;
    for (std::size_t j = 0; j < c.size(); ++j) v += c[j] * x[j];
    return v;
  }

  /// Largest violation of any row or bound at x.
  double max_residual(const std::vector<double>& x) const {
    double r = 0.0;
    auto lhs = [&](const LpRow& row) {
      double s = 0.0;
      for (const auto& t : row.terms) s += t.coef * x[t.var];
      return s;
    };
    for (const auto& row : eq) r = std::max(r, std::abs(lhs(row) - row.rhs));
    for (const auto& row : le) r = std::max(r, lhs(row) - row.rhs);
    for (std::size_t j = 0; j < x.size(); ++j) {
      r = std::max(r, lower[j] - x[j]);
      r = std::max(r, x[j] - upper[j]);
    }
    return r;
  }

  static constexpr double kInfinity = std::numeric_limits<double>::infinity();
};

enum class LpStatus { Optimal, Infeasible, Unbounded, IterationLimit, NumericalError };

inline const char* to_string(LpStatus s) {
  switch (s) {
    case LpStatus::Optimal: return "optimal";
    case LpStatus::Infeasible: return "infeasible";
    case LpStatus::Unbounded: return "unbounded";
    case LpStatus::IterationLimit: return "iteration_limit";
    case LpStatus::NumericalError: return "numerical_error";
  }
  return "?";
}

struct LpOutcome {
  LpStatus status = LpStatus::NumericalError;
  double value = 0.0;
  std::vector<double> solution;
  std::size_t iterations = 0;
  double max_residual = 0.0;
};

struct LpTolerances {
  double feasibility = 1e-9;
  double optimality = 1e-9;
  double pivot = 1e-9;
  std::size_t max_iterations = 1'000'000;
  std::size_t refactor_every = 50;
  /// Consecutive degenerate pivots before switching to Bland's rule.
  std::size_t bland_after = 50;
};

namespace detail {

class RevisedSimplex {
 public:
  RevisedSimplex(const LinearProgram& lp, const LpTolerances& tol) : lp_(lp), tol_(tol) {}

  LpOutcome run() {
    LpOutcome out;
    setup();
    // Phase 1: minimise the sum of artificials.
    std::vector<double> cost(N_, 0.0);
    for (std::size_t j = art_begin_; j < N_; ++j) cost[j] = 1.0;
    LpStatus st = iterate(cost, out.iterations);
    if (st == LpStatus::IterationLimit || st == LpStatus::NumericalError) {
      out.status = st;
      return out;
    }
    double infeas = 0.0;
    for (std::size_t j = art_begin_; j < N_; ++j) infeas += std::abs(x_[j]);
    if (infeas > tol_.feasibility) {
      out.status = LpStatus::Infeasible;
      return out;
    }
    // Phase 2: artificials are fixed at zero and never re-enter.
    for (std::size_t j = art_begin_; j < N_; ++j) {
      hi_[j] = 0.0;
      if (!basic_[j]) x_[j] = 0.0;
    }
    if (!refactor()) {
      out.status = LpStatus::NumericalError;
      return out;
    }
    std::fill(cost.begin(), cost.end(), 0.0);
    const double sign = lp_.sense == LinearProgram::Sense::Maximize ? -1.0 : 1.0;
    for (std::size_t j = 0; j < n_; ++j) cost[j] = sign * lp_.c[j];
    st = iterate(cost, out.iterations);
    out.status = st;
    if (st != LpStatus::Optimal) return out;
    out.solution.assign(x_.begin(), x_.begin() + static_cast<std::ptrdiff_t>(n_));
    // Snap values that drifted within tolerance of a bound.
    for (std::size_t j = 0; j < n_; ++j) {
      double& v = out.solution[j];
      if (std::isfinite(lp_.lower[j]) && v < lp_.lower[j]) v = lp_.lower[j];
      if (std::isfinite(lp_.upper[j]) && v > lp_.upper[j]) v = lp_.upper[j];
    }
    out.value = lp_.objective_value(out.solution);
    out.max_residual = lp_.max_residual(out.solution);
    return out;
  }

 private:
  enum class At : unsigned char { Lower, Upper, Zero };

  struct SparseCol {
    std::vector<std::size_t> idx;
    std::vector<double> val;
  };

  void setup() {
    n_ = lp_.num_vars();
    m_eq_ = lp_.eq.size();
    m_ = m_eq_ + lp_.le.size();
    // Row equilibration.
    row_scale_.assign(m_, 1.0);
    b_.assign(m_, 0.0);
    for (std::size_t i = 0; i < m_; ++i) {
      const LpRow& row = i < m_eq_ ? lp_.eq[i] : lp_.le[i - m_eq_];
      double mx = 0.0;
      for (const auto& t : row.terms) mx = std::max(mx, std::abs(t.coef));
      row_scale_[i] = mx > 0.0 ? 1.0 / mx : 1.0;
      b_[i] = row.rhs * row_scale_[i];
    }
    cols_.assign(n_, SparseCol{});
    for (std::size_t i = 0; i < m_; ++i) {
      const LpRow& row = i < m_eq_ ? lp_.eq[i] : lp_.le[i - m_eq_];
      for (const auto& t : row.terms) {
        if (t.coef == 0.0) continue;
        cols_[t.var].idx.push_back(i);
        cols_[t.var].val.push_back(t.coef * row_scale_[i]);
      }
    }
    // Merge duplicate entries within a column.
    for (auto& col : cols_) {
      std::vector<std::pair<std::size_t, double>> e;
      for (std::size_t k = 0; k < col.idx.size(); ++k) e.emplace_back(col.idx[k], col.val[k]);
      std::sort(e.begin(), e.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
      col.idx.clear();
      col.val.clear();
      for (const auto& [i, v] : e) {
        if (!col.idx.empty() && col.idx.back() == i) {
          col.val.back() += v;
        } else {
          col.idx.push_back(i);
          col.val.push_back(v);
        }
      }
    }
    lo_.assign(lp_.lower.begin(), lp_.lower.end());
    hi_.assign(lp_.upper.begin(), lp_.upper.end());
    x_.assign(n_, 0.0);
    at_.assign(n_, At::Zero);
    for (std::size_t j = 0; j < n_; ++j) {
      if (std::isfinite(lo_[j])) {
        x_[j] = lo_[j];
        at_[j] = At::Lower;
      } else if (std::isfinite(hi_[j])) {
        x_[j] = hi_[j];
        at_[j] = At::Upper;
      }
    }
    // Slacks for <= rows.
    for (std::size_t i = m_eq_; i < m_; ++i) {
      cols_.push_back(SparseCol{{i}, {1.0}});
      lo_.push_back(0.0);
      hi_.push_back(kInf);
      x_.push_back(0.0);
      at_.push_back(At::Lower);
    }
    std::vector<double> r = b_;
    for (std::size_t j = 0; j < n_; ++j) {
      if (x_[j] == 0.0) continue;
      for (std::size_t k = 0; k < cols_[j].idx.size(); ++k) r[cols_[j].idx[k]] -= cols_[j].val[k] * x_[j];
    }
    head_.assign(m_, 0);
    art_begin_ = cols_.size();
    basic_.assign(cols_.size(), 0);
    for (std::size_t i = 0; i < m_; ++i) {
      if (i >= m_eq_ && r[i] >= 0.0) {
        const std::size_t s = n_ + (i - m_eq_);
        head_[i] = s;
        basic_[s] = 1;
        x_[s] = r[i];
        continue;
      }
      const double sg = r[i] >= 0.0 ? 1.0 : -1.0;
      cols_.push_back(SparseCol{{i}, {sg}});
      lo_.push_back(0.0);
      hi_.push_back(kInf);
      x_.push_back(std::abs(r[i]));
      at_.push_back(At::Lower);
      basic_.push_back(1);
      head_[i] = cols_.size() - 1;
    }
    N_ = cols_.size();
    binv_.assign(m_ * m_, 0.0);
    for (std::size_t i = 0; i < m_; ++i) binv_[i * m_ + i] = cols_[head_[i]].val[0] > 0 ? 1.0 : -1.0;
  }

  // binv_ is column-major: element (i, k) at k * m_ + i.
  double& B(std::size_t i, std::size_t k) { return binv_[k * m_ + i]; }

  bool refactor() {
    if (m_ == 0) return true;
    // Gauss-Jordan on [B | I] with partial pivoting, row-major work copy.
    std::vector<double> a(m_ * m_, 0.0), inv(m_ * m_, 0.0);
    for (std::size_t i = 0; i < m_; ++i) {
      const auto& col = cols_[head_[i]];
      for (std::size_t k = 0; k < col.idx.size(); ++k) a[col.idx[k] * m_ + i] = col.val[k];
      inv[i * m_ + i] = 1.0;
    }
    for (std::size_t p = 0; p < m_; ++p) {
      std::size_t piv = p;
      double best = std::abs(a[p * m_ + p]);
      for (std::size_t r = p + 1; r < m_; ++r) {
        if (std::abs(a[r * m_ + p]) > best) {
          best = std::abs(a[r * m_ + p]);
          piv = r;
        }
      }
      if (best < 1e-13) return false;
      if (piv != p) {
        for (std::size_t k = 0; k < m_; ++k) {
          std::swap(a[p * m_ + k], a[piv * m_ + k]);
          std::swap(inv[p * m_ + k], inv[piv * m_ + k]);
        }
      }
      const double d = a[p * m_ + p];
      for (std::size_t k = 0; k < m_; ++k) {
        a[p * m_ + k] /= d;
        inv[p * m_ + k] /= d;
      }
      for (std::size_t r = 0; r < m_; ++r) {
        if (r == p) continue;
        const double f = a[r * m_ + p];
        if (f == 0.0) continue;
        for (std::size_t k = 0; k < m_; ++k) {
          a[r * m_ + k] -= f * a[p * m_ + k];
          inv[r * m_ + k] -= f * inv[p * m_ + k];
        }
      }
    }
    // inv is B^{-1} row-major; store column-major.
    for (std::size_t i = 0; i < m_; ++i) {
      for (std::size_t k = 0; k < m_; ++k) binv_[k * m_ + i] = inv[i * m_ + k];
    }
    // Recompute basic values from the nonbasic ones.
    std::vector<double> r = b_;
    for (std::size_t j = 0; j < N_; ++j) {
      if (basic_[j] || x_[j] == 0.0) continue;
      for (std::size_t k = 0; k < cols_[j].idx.size(); ++k) r[cols_[j].idx[k]] -= cols_[j].val[k] * x_[j];
    }
    for (std::size_t i = 0; i < m_; ++i) {
      double s = 0.0;
      for (std::size_t k = 0; k < m_; ++k) s += binv_[k * m_ + i] * r[k];
      x_[head_[i]] = s;
    }
    return true;
  }

  void ftran(std::size_t j, std::vector<double>& alpha) {
    alpha.assign(m_, 0.0);
    const auto& col = cols_[j];
    for (std::size_t t = 0; t < col.idx.size(); ++t) {
      const double v = col.val[t];
      const double* bk = &binv_[col.idx[t] * m_];
      for (std::size_t i = 0; i < m_; ++i) alpha[i] += bk[i] * v;
    }
  }

  LpStatus iterate(const std::vector<double>& cost, std::size_t& iters) {
    std::vector<double> y(m_), alpha;
    std::size_t since_refactor = 0;
    std::size_t degenerate_run = 0;
    while (true) {
      if (iters >= tol_.max_iterations) return LpStatus::IterationLimit;
      // Duals y = c_B^T B^{-1}.
      for (std::size_t k = 0; k < m_; ++k) {
        double s = 0.0;
        const double* bk = &binv_[k * m_];
        for (std::size_t i = 0; i < m_; ++i) s += cost[head_[i]] * bk[i];
        y[k] = s;
      }
      const bool bland = degenerate_run >= tol_.bland_after;
      std::size_t q = N_;
      double best = 0.0;
      double dir = 0.0;
      for (std::size_t j = 0; j < N_; ++j) {
        if (basic_[j] || !(hi_[j] > lo_[j])) continue;
        double d = cost[j];
        const auto& col = cols_[j];
        for (std::size_t t = 0; t < col.idx.size(); ++t) d -= y[col.idx[t]] * col.val[t];
        double s = 0.0;
        if (at_[j] == At::Lower && d < -tol_.optimality) s = 1.0;
        if (at_[j] == At::Upper && d > tol_.optimality) s = -1.0;
        if (at_[j] == At::Zero && std::abs(d) > tol_.optimality) s = d < 0.0 ? 1.0 : -1.0;
        if (s == 0.0) continue;
        if (bland) {
          q = j;
          dir = s;
          break;
        }
        if (std::abs(d) > best) {
          best = std::abs(d);
          q = j;
          dir = s;
        }
      }
      if (q == N_) return LpStatus::Optimal;

      ftran(q, alpha);
      // Ratio test.
      double theta = kInf;
      for (std::size_t i = 0; i < m_; ++i) {
        const double delta = dir * alpha[i];
        const std::size_t v = head_[i];
        double lim = kInf;
        if (delta > tol_.pivot && std::isfinite(lo_[v])) lim = (x_[v] - lo_[v]) / delta;
        if (delta < -tol_.pivot && std::isfinite(hi_[v])) lim = (hi_[v] - x_[v]) / -delta;
        theta = std::min(theta, std::max(lim, 0.0));
      }
      const double flip = hi_[q] - lo_[q];
      std::size_t r = m_;
      if (theta < flip) {
        // Among rows attaining the minimum ratio, prefer the largest pivot;
        // under Bland's rule, the smallest variable index.
        double best_piv = 0.0;
        for (std::size_t i = 0; i < m_; ++i) {
          const double delta = dir * alpha[i];
          const std::size_t v = head_[i];
          double lim = kInf;
          if (delta > tol_.pivot && std::isfinite(lo_[v])) lim = (x_[v] - lo_[v]) / delta;
          if (delta < -tol_.pivot && std::isfinite(hi_[v])) lim = (hi_[v] - x_[v]) / -delta;
          if (!std::isfinite(lim) || std::max(lim, 0.0) > theta + 1e-12) continue;
          if (r == m_) {
            r = i;
            best_piv = std::abs(alpha[i]);
            continue;
          }
          if (bland ? head_[i] < head_[r] : std::abs(alpha[i]) > best_piv) {
            r = i;
            best_piv = std::abs(alpha[i]);
          }
        }
      }
      if (r == m_ && !std::isfinite(flip)) return LpStatus::Unbounded;
      const double t = r == m_ ? flip : theta;
      ++iters;
      degenerate_run = t <= 1e-12 ? degenerate_run + 1 : 0;

      x_[q] += dir * t;
      for (std::size_t i = 0; i < m_; ++i) x_[head_[i]] -= dir * t * alpha[i];
      if (r == m_) {
        at_[q] = dir > 0 ? At::Upper : At::Lower;
        x_[q] = dir > 0 ? hi_[q] : lo_[q];
        continue;
      }
      const std::size_t leave = head_[r];
      const double delta = dir * alpha[r];
      if (delta > 0.0) {
        x_[leave] = lo_[leave];
        at_[leave] = At::Lower;
      } else {
        x_[leave] = hi_[leave];
        at_[leave] = At::Upper;
      }
      basic_[leave] = 0;
      basic_[q] = 1;
      head_[r] = q;
      // Product-form update of B^{-1}.
      const double piv = alpha[r];
      for (std::size_t k = 0; k < m_; ++k) {
        double* bk = &binv_[k * m_];
        const double br = bk[r] / piv;
        if (br == 0.0) {
          bk[r] = 0.0;
          continue;
        }
        for (std::size_t i = 0; i < m_; ++i) bk[i] -= alpha[i] * br;
        bk[r] = br;
      }
      if (++since_refactor >= tol_.refactor_every) {
        since_refactor = 0;
        if (!refactor()) return LpStatus::NumericalError;
      }
    }
  }

  static constexpr double kInf = std::numeric_limits<double>::infinity();

  const LinearProgram& lp_;
  LpTolerances tol_;
  std::size_t n_ = 0, m_ = 0, m_eq_ = 0, N_ = 0, art_begin_ = 0;
  std::vector<double> row_scale_, b_, lo_, hi_, x_, binv_;
  std::vector<SparseCol> cols_;
  std::vector<At> at_;
  std::vector<std::size_t> head_;
  std::vector<char> basic_;
};

}  // namespace detail

/// Solves the program. Infeasible, unbounded and iteration-limit outcomes
/// are regular statuses; malformed programs throw LpError.
inline LpOutcome solve(const LinearProgram& lp, const LpTolerances& tol = {}) {
  lp.check();
  detail::RevisedSimplex s(lp, tol);
  return s.run();
}

// --- CPLEX LP text format ---------------------------------------------------

namespace detail {

inline std::string lp_number(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline void lp_write_terms(std::ostringstream& os, std::string head, const std::vector<LpTerm>& terms,
                           const std::vector<std::string>& names) {
  constexpr std::size_t kWidth = 200;
  std::string line = std::move(head);
  for (const auto& t : terms) {
    std::string piece = (t.coef < 0 ? " - " : " + ") + lp_number(std::abs(t.coef)) + " " + names[t.var];
    if (line.size() + piece.size() > kWidth) {
      os << line << "\n";
      line = "  ";
    }
    line += piece;
  }
  os << line;
}

}  // namespace detail

/// Serializes in CPLEX LP format. Every variable appears in the Bounds
/// section in index order, so re-importing preserves the variable order.
inline std::string export_lp(const LinearProgram& lp, const std::string& title = "mtebounds") {
  lp.check();
  std::ostringstream os;
  os << "\\ " << title << "\n";
  os << (lp.sense == LinearProgram::Sense::Maximize ? "Maximize" : "Minimize") << "\n";
  std::vector<LpTerm> obj;
  for (std::size_t j = 0; j < lp.c.size(); ++j) {
    if (lp.c[j] != 0.0) obj.push_back({j, lp.c[j]});
  }
  detail::lp_write_terms(os, " obj:", obj, lp.names);
  os << "\nSubject To\n";
  for (const auto& row : lp.eq) {
    detail::lp_write_terms(os, " " + row.name + ":", row.terms, lp.names);
    os << " = " << detail::lp_number(row.rhs) << "\n";
  }
  for (const auto& row : lp.le) {
    detail::lp_write_terms(os, " " + row.name + ":", row.terms, lp.names);
    os << " <= " << detail::lp_number(row.rhs) << "\n";
  }
  os << "Bounds\n";
  for (std::size_t j = 0; j < lp.c.size(); ++j) {
    const double lo = lp.lower[j], hi = lp.upper[j];
    const std::string& n = lp.names[j];
    if (std::isinf(lo) && std::isinf(hi)) {
      os << " " << n << " free\n";
    } else if (lo == hi) {
      os << " " << n << " = " << detail::lp_number(lo) << "\n";
    } else if (std::isinf(hi)) {
      os << " " << n << " >= " << detail::lp_number(lo) << "\n";
    } else if (std::isinf(lo)) {
      os << " -inf <= " << n << " <= " << detail::lp_number(hi) << "\n";
    } else {
      os << " " << detail::lp_number(lo) << " <= " << n << " <= " << detail::lp_number(hi) << "\n";
    }
  }
  os << "End\n";
  return os.str();
}

/// Reads the subset of CPLEX LP written by export_lp: one objective,
/// "=", "<=" and ">=" rows, and explicit bounds. Variables missing from the
/// Bounds section default to [0, inf) and are numbered in order of first
/// appearance after the listed ones.
inline LinearProgram import_lp(const std::string& text) {
  LinearProgram lp;
  std::map<std::string, std::size_t> index;
  auto var = [&](const std::string& name) {
    auto it = index.find(name);
    if (it != index.end()) return it->second;
    const std::size_t j = lp.add_variable(name);
    index.emplace(name, j);
    return j;
  };
  auto lower_case = [](std::string s) {
    for (auto& ch : s) ch = static_cast<char>(std::tolower(static_cast<unsigned char>(ch)));
    return s;
  };
  auto parse_number = [](const std::string& tok) {
    const std::string t = [&] {
      std::string s;
      for (char ch : tok) s += static_cast<char>(std::tolower(static_cast<unsigned char>(ch)));
      return s;
    }();
    if (t == "inf" || t == "+inf" || t == "infinity" || t == "+infinity") return LinearProgram::kInfinity;
    if (t == "-inf" || t == "-infinity") return -LinearProgram::kInfinity;
    std::size_t pos = 0;
    double v = std::stod(tok, &pos);
    if (pos != tok.size()) throw LpError("import_lp: malformed number '" + tok + "'");
    return v;
  };
  auto is_number = [&](const std::string& tok) {
    try {
      parse_number(tok);
      return true;
    } catch (...) {
      return false;
    }
  };

  // Split into sections.
  std::istringstream in(text);
  std::string line, section;
  std::string obj_text, rows_text;
  std::vector<std::string> bound_lines;
  while (std::getline(in, line)) {
    if (auto p = line.find('\\'); p != std::string::npos) line.erase(p);
    std::string key = lower_case(line);
    const auto first = key.find_first_not_of(" \t\r");
    key = first == std::string::npos ? std::string() : key.substr(first, key.find_last_not_of(" \t\r") - first + 1);
    if (key == "minimize" || key == "minimise" || key == "min") {
      section = "obj";
      lp.sense = LinearProgram::Sense::Minimize;
      continue;
    }
    if (key == "maximize" || key == "maximise" || key == "max") {
      section = "obj";
      lp.sense = LinearProgram::Sense::Maximize;
      continue;
    }
    if (key == "subject to" || key == "st" || key == "s.t.") {
      section = "rows";
      continue;
    }
    if (key == "bounds") {
      section = "bounds";
      continue;
    }
    if (key == "end") break;
    if (section == "obj") obj_text += " " + line;
    if (section == "rows") rows_text += " " + line;
    if (section == "bounds" && !key.empty()) bound_lines.push_back(line);
  }

  auto tokenize = [](const std::string& s) {
    std::vector<std::string> out;
    std::string cur;
    auto flush = [&] {
      if (!cur.empty()) out.push_back(cur);
      cur.clear();
    };
    for (std::size_t i = 0; i < s.size(); ++i) {
      const char ch = s[i];
      if (std::isspace(static_cast<unsigned char>(ch))) {
        flush();
      } else if (ch == ':') {
        cur += ch;
        flush();
      } else if (ch == '<' || ch == '>' || ch == '=') {
        flush();
        std::string op(1, ch);
        if (i + 1 < s.size() && s[i + 1] == '=') {
          op += '=';
          ++i;
        }
        out.push_back(op);
      } else {
        cur += ch;
      }
    }
    flush();
    return out;
  };

  // Bounds first so that listed variables keep their order.
  struct BoundSpec {
    std::string name;
    double lo, hi;
  };
  std::vector<BoundSpec> bounds;
  for (const auto& bl : bound_lines) {
    auto tok = tokenize(bl);
    const double inf = LinearProgram::kInfinity;
    if (tok.size() == 2 && lower_case(tok[1]) == "free") {
      bounds.push_back({tok[0], -inf, inf});
    } else if (tok.size() == 3 && (tok[1] == "=" || tok[1] == ">=" || tok[1] == "<=")) {
      const double v = parse_number(tok[2]);
      if (tok[1] == "=") bounds.push_back({tok[0], v, v});
      if (tok[1] == ">=") bounds.push_back({tok[0], v, inf});
      if (tok[1] == "<=") bounds.push_back({tok[0], 0.0, v});
    } else if (tok.size() == 5 && tok[1] == "<=" && tok[3] == "<=") {
      bounds.push_back({tok[2], parse_number(tok[0]), parse_number(tok[4])});
    } else {
      throw LpError("import_lp: unsupported bound line '" + bl + "'");
    }
  }
  for (const auto& b : bounds) {
    const std::size_t j = var(b.name);
    lp.lower[j] = b.lo;
    lp.upper[j] = b.hi;
  }

  auto parse_terms = [&](const std::vector<std::string>& tok, std::size_t& i, std::vector<LpTerm>& terms) {
    while (i < tok.size() && tok[i] != "=" && tok[i] != "<=" && tok[i] != ">=" && tok[i] != "<" &&
           tok[i] != ">" && tok[i].back() != ':') {
      double sign = 1.0;
      if (tok[i] == "+" || tok[i] == "-") {
        sign = tok[i] == "-" ? -1.0 : 1.0;
        ++i;
      }
      double coef = 1.0;
      if (i < tok.size() && is_number(tok[i])) {
        coef = parse_number(tok[i]);
        ++i;
      }
      if (i >= tok.size()) throw LpError("import_lp: dangling coefficient");
      terms.push_back({var(tok[i]), sign * coef});
      ++i;
    }
  };

  {
    auto tok = tokenize(obj_text);
    std::size_t i = 0;
    if (i < tok.size() && tok[i].back() == ':') ++i;
    std::vector<LpTerm> terms;
    parse_terms(tok, i, terms);
    for (const auto& t : terms) lp.c[t.var] += t.coef;
  }
  {
    auto tok = tokenize(rows_text);
    std::size_t i = 0;
    while (i < tok.size()) {
      std::string name;
      if (tok[i].back() == ':') {
        name = tok[i].substr(0, tok[i].size() - 1);
        ++i;
      }
      std::vector<LpTerm> terms;
      parse_terms(tok, i, terms);
      if (i + 1 >= tok.size()) throw LpError("import_lp: row without a right-hand side");
      const std::string op = tok[i];
      const double rhs = parse_number(tok[i + 1]);
      i += 2;
      if (op == "=") {
        lp.add_eq(std::move(terms), rhs, name);
      } else if (op == "<=" || op == "<") {
        lp.add_le(std::move(terms), rhs, name);
      } else {
        lp.add_ge(std::move(terms), rhs, name);
      }
    }
  }
  // c may have grown as rows introduced new variables.
  lp.c.resize(lp.names.size(), 0.0);
  return lp;
}

}  // namespace mtebounds
