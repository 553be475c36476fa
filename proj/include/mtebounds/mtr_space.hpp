#pragma once

// Linear parameterizations of the MTRs m_{d|x}(u) = sum_k alpha_{k,d|x} b_k(u)
// and compilation of data moments and shape restrictions into linear
// constraints on alpha.
//
// Two bases are supported: indicators of the cells of a grid partition
// (piecewise constant), and tensor-product Bernstein polynomials whose
// shape restrictions are imposed over an evaluation grid.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <map>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "mtebounds/distributions.hpp"
#include "mtebounds/geometry.hpp"
#include "mtebounds/lp.hpp"

namespace mtebounds {

enum class BasisMode { PiecewiseConstant, Bernstein };
enum class Direction { Increasing, Decreasing };

/// Shape restrictions. Dimensions are 0-based here.
struct ShapeRestrictions {
  std::optional<std::pair<double, double>> bounds;
  /// (d_hi, d_lo): m_{d_hi|x}(u) >= m_{d_lo|x}(u).
  std::vector<std::pair<std::size_t, std::size_t>> md;
  std::vector<std::pair<std::size_t, Direction>> cm;
  std::vector<std::pair<std::size_t, Direction>> um;
  std::vector<std::size_t> cs;
  std::vector<std::size_t> us;

  bool empty() const { return !bounds && md.empty() && cm.empty() && um.empty() && cs.empty() && us.empty(); }
};

class BernsteinBasis {
 public:
  BernsteinBasis(std::vector<std::size_t> degree, std::size_t grid_points)
      : degree_(std::move(degree)), grid_points_(grid_points) {
    if (degree_.empty()) throw std::invalid_argument("bernstein basis: dimension must be positive");
    if (grid_points_ < 2) throw std::invalid_argument("bernstein basis: at least two grid points per dimension");
    size_ = 1;
    for (auto n : degree_) size_ *= n + 1;
    for (auto n : degree_) {
      std::vector<double> row(n + 1);
      for (std::size_t k = 0; k <= n; ++k) row[k] = binomial(n, k);
      binom_.push_back(std::move(row));
    }
  }

  std::size_t dim() const { return degree_.size(); }
  std::size_t size() const { return size_; }
  std::size_t grid_points() const { return grid_points_; }
  const std::vector<std::size_t>& degree() const { return degree_; }

  /// Writes b_k(u) for every k; multi-index row-major, last dimension fastest.
  void eval(std::span<const double> u, std::span<double> out) const {
    std::vector<std::vector<double>> per(dim());
    for (std::size_t j = 0; j < dim(); ++j) {
      const std::size_t n = degree_[j];
      per[j].resize(n + 1);
      for (std::size_t k = 0; k <= n; ++k) {
        per[j][k] = binom_[j][k] * std::pow(u[j], static_cast<double>(k)) *
                    std::pow(1.0 - u[j], static_cast<double>(n - k));
      }
    }
    std::vector<std::size_t> idx(dim(), 0);
    for (std::size_t k = 0; k < size_; ++k) {
      double v = 1.0;
      for (std::size_t j = 0; j < dim(); ++j) v *= per[j][idx[j]];
      out[k] = v;
      for (std::size_t j = dim(); j-- > 0;) {
        if (++idx[j] <= degree_[j]) break;
        idx[j] = 0;
      }
    }
  }

  std::vector<double> eval(std::span<const double> u) const {
    std::vector<double> out(size_);
    eval(u, out);
    return out;
  }

  double grid_value(std::size_t i) const { return static_cast<double>(i) / static_cast<double>(grid_points_ - 1); }

  std::size_t grid_size() const {
    std::size_t s = 1;
    for (std::size_t j = 0; j < dim(); ++j) s *= grid_points_;
    return s;
  }

  std::vector<std::size_t> grid_index(std::size_t p) const {
    std::vector<std::size_t> idx(dim());
    for (std::size_t j = dim(); j-- > 0;) {
      idx[j] = p % grid_points_;
      p /= grid_points_;
    }
    return idx;
  }

  std::vector<double> grid_point(std::size_t p) const {
    auto idx = grid_index(p);
    std::vector<double> u(dim());
    for (std::size_t j = 0; j < dim(); ++j) u[j] = grid_value(idx[j]);
    return u;
  }

  std::size_t grid_stride(std::size_t j) const {
    std::size_t s = 1;
    for (std::size_t i = j + 1; i < dim(); ++i) s *= grid_points_;
    return s;
  }

 private:
  static double binomial(std::size_t n, std::size_t k) {
    double r = 1.0;
    for (std::size_t i = 1; i <= k; ++i) r = r * static_cast<double>(n - k + i) / static_cast<double>(i);
    return r;
  }

  std::vector<std::size_t> degree_;
  std::size_t grid_points_;
  std::size_t size_ = 1;
  std::vector<std::vector<double>> binom_;
};

/// MTR coefficient space for n_d treatments and one distribution per
/// covariate cell. Primary variable (k, d, x) has index (x * n_d + d) * K + k
/// in the programs built by add_variables.
class MtrSpace {
 public:
  MtrSpace(Partition partition, std::vector<UDistribution> dists, std::size_t n_d, QuadratureOptions quad = {})
      : mode_(BasisMode::PiecewiseConstant),
        partition_(std::move(partition)),
        dists_(std::move(dists)),
        n_d_(n_d),
        quad_(quad) {
    check_common();
    if (partition_->dim() != dim()) throw std::invalid_argument("mtr space: partition dimension mismatch");
    mu_.assign(n_x(), std::vector<double>(partition_->size()));
    for (std::size_t x = 0; x < n_x(); ++x) {
      for (std::size_t k = 0; k < partition_->size(); ++k) mu_[x][k] = rect_measure(dists_[x], partition_->cell(k), quad_);
    }
  }

  MtrSpace(BernsteinBasis basis, std::vector<UDistribution> dists, std::size_t n_d, QuadratureOptions quad = {})
      : mode_(BasisMode::Bernstein), bernstein_(std::move(basis)), dists_(std::move(dists)), n_d_(n_d), quad_(quad) {
    check_common();
    if (bernstein_->dim() != dim()) throw std::invalid_argument("mtr space: basis dimension mismatch");
  }

  BasisMode mode() const { return mode_; }
  std::size_t dim() const { return dimension(dists_.front()); }
  std::size_t K() const { return mode_ == BasisMode::PiecewiseConstant ? partition_->size() : bernstein_->size(); }
  std::size_t n_d() const { return n_d_; }
  std::size_t n_x() const { return dists_.size(); }
  std::size_t num_primary() const { return K() * n_d_ * n_x(); }
  std::size_t var(std::size_t k, std::size_t d, std::size_t x) const { return (x * n_d_ + d) * K() + k; }
  const Partition& partition() const { return *partition_; }
  const BernsteinBasis& bernstein() const { return *bernstein_; }
  const UDistribution& dist(std::size_t x) const { return dists_[x]; }
  const QuadratureOptions& quadrature() const { return quad_; }

  /// P(U in cell k | X = x); piecewise mode only.
  double cell_measure(std::size_t x, std::size_t k) const { return mu_[x][k]; }

  /// Integrals of every basis function over s under F_x.
  std::vector<double> set_coefficients(const RectUnion& s, std::size_t x) const {
    std::vector<double> out(K(), 0.0);
    if (mode_ == BasisMode::PiecewiseConstant) {
      for (std::size_t k : cells_within(*partition_, s)) out[k] = mu_[x][k];
      return out;
    }
    const BernsteinBasis& b = *bernstein_;
    PointFunction f = [&b](std::span<const double> u, std::span<double> o) { b.eval(u, o); };
    for (const auto& r : s.rects()) {
      auto part = rect_expectation(dists_[x], r, f, K(), quad_);
      for (std::size_t k = 0; k < K(); ++k) out[k] += part[k];
    }
    return out;
  }

  std::string var_name(std::size_t k, std::size_t d, std::size_t x) const {
    const char* tag = mode_ == BasisMode::PiecewiseConstant ? "a_c" : "b_k";
    return std::string(tag) + std::to_string(k) + "_d" + std::to_string(d) + "_x" + std::to_string(x);
  }

  /// Appends the primary variables. In piecewise mode a bound restriction
  /// becomes native variable bounds; otherwise variables are free.
  void add_variables(LinearProgram& lp, const ShapeRestrictions& r) const {
    if (lp.num_vars() != 0) throw std::invalid_argument("mtr space: primary variables must come first");
    const double inf = LinearProgram::kInfinity;
    for (std::size_t x = 0; x < n_x(); ++x) {
      for (std::size_t d = 0; d < n_d_; ++d) {
        for (std::size_t k = 0; k < K(); ++k) {
          double lo = -inf, hi = inf;
          if (mode_ == BasisMode::PiecewiseConstant && r.bounds) {
            lo = r.bounds->first;
            hi = r.bounds->second;
          }
          lp.add_variable(var_name(k, d, x), lo, hi);
        }
      }
    }
  }

 private:
  void check_common() {
    if (dists_.empty()) throw std::invalid_argument("mtr space: at least one covariate cell required");
    if (n_d_ == 0) throw std::invalid_argument("mtr space: at least one treatment required");
    for (const auto& d : dists_) {
      if (dimension(d) != dimension(dists_.front())) {
        throw std::invalid_argument("mtr space: distributions must share a dimension");
      }
    }
  }

  BasisMode mode_;
  std::optional<Partition> partition_;
  std::optional<BernsteinBasis> bernstein_;
  std::vector<UDistribution> dists_;
  std::size_t n_d_;
  QuadratureOptions quad_;
  std::vector<std::vector<double>> mu_;
};

/// Outcome of compiling the data moments.
struct DataCompilation {
  bool infeasible = false;
  std::string message;
  std::size_t rows = 0;
  std::size_t dropped = 0;
};

/// One equality per (d, z, x): sum_k alpha_{k,d|x} int_{region} b_k dF_x = E.
/// regions[x][z][d]; e[x][z][d]. Regions of measure zero are dropped when
/// E is within tol of zero and flag infeasibility otherwise.
inline DataCompilation compile_data_constraints(const MtrSpace& space, LinearProgram& lp,
                                                const std::vector<std::vector<std::vector<RectUnion>>>& regions,
                                                const std::vector<std::vector<std::vector<double>>>& e,
                                                double tol = 1e-8) {
  DataCompilation out;
  for (std::size_t x = 0; x < space.n_x(); ++x) {
    for (std::size_t z = 0; z < regions[x].size(); ++z) {
      for (std::size_t d = 0; d < space.n_d(); ++d) {
        auto coef = space.set_coefficients(regions[x][z][d], x);
        std::vector<LpTerm> terms;
        for (std::size_t k = 0; k < coef.size(); ++k) {
          if (coef[k] != 0.0) terms.push_back({space.var(k, d, x), coef[k]});
        }
        const double rhs = e[x][z][d];
        if (terms.empty()) {
          if (std::abs(rhs) <= tol) {
            ++out.dropped;
            continue;
          }
          out.infeasible = true;
          std::ostringstream os;
          os << "selection region of d=" << d << " at z=" << z << ", x=" << x
             << " has probability zero but the outcome moment is " << rhs;
          out.message = os.str();
          continue;
        }
        lp.add_eq(std::move(terms), rhs,
                  "data_d" + std::to_string(d) + "_z" + std::to_string(z) + "_x" + std::to_string(x));
        ++out.rows;
      }
    }
  }
  return out;
}

struct ShapeCompilation {
  std::size_t rows = 0;
  std::size_t aux_vars = 0;
  std::vector<std::string> notes;
};

namespace detail {

inline void add_signed_row(LinearProgram& lp, std::vector<LpTerm> terms, Direction dir, std::string name) {
  // Increasing: lower - upper <= 0, with terms given as lower - upper.
  if (dir == Direction::Decreasing) {
    for (auto& t : terms) t.coef = -t.coef;
  }
  lp.add_le(std::move(terms), 0.0, std::move(name));
}

inline std::vector<LpTerm> combine(const std::vector<double>& lo_coef, const std::vector<double>& hi_coef,
                                   const MtrSpace& s, std::size_t d, std::size_t x) {
  std::vector<LpTerm> terms;
  for (std::size_t k = 0; k < lo_coef.size(); ++k) {
    const double c = lo_coef[k] - hi_coef[k];
    if (c != 0.0) terms.push_back({s.var(k, d, x), c});
  }
  return terms;
}

inline std::string tag(const char* kind, std::size_t j) { return std::string(kind) + std::to_string(j + 1); }

inline void compile_shape_piecewise(const MtrSpace& s, LinearProgram& lp, const ShapeRestrictions& r,
                                    ShapeCompilation& out) {
  const Partition& p = s.partition();
  const std::size_t K = s.K();
  auto positive = [&](std::size_t x, std::size_t k) { return s.cell_measure(x, k) > 0.0; };

  for (const auto& [dh, dl] : r.md) {
    for (std::size_t x = 0; x < s.n_x(); ++x) {
      for (std::size_t k = 0; k < K; ++k) {
        if (!positive(x, k)) continue;
        lp.add_le({{s.var(k, dl, x), 1.0}, {s.var(k, dh, x), -1.0}}, 0.0,
                  "md_d" + std::to_string(dh) + "d" + std::to_string(dl) + "_c" + std::to_string(k) + "_x" +
                      std::to_string(x));
        ++out.rows;
      }
    }
  }

  for (const auto& [j, dir] : r.cm) {
    for (std::size_t x = 0; x < s.n_x(); ++x) {
      for (std::size_t k = 0; k < K; ++k) {
        if (p.interval_index(k, j) + 1 >= p.intervals(j)) continue;
        const std::size_t up = k + p.stride(j);
        if (!positive(x, k) || !positive(x, up)) continue;
        for (std::size_t d = 0; d < s.n_d(); ++d) {
          detail::add_signed_row(lp, {{s.var(k, d, x), 1.0}, {s.var(up, d, x), -1.0}}, dir,
                                 tag("cm", j) + "_c" + std::to_string(k) + "_d" + std::to_string(d) + "_x" +
                                     std::to_string(x));
          ++out.rows;
        }
      }
    }
  }

  // Slab averages E[m | U_j in slab] = sum_k alpha_k P(U in cell_k | U_j in slab).
  auto slab_terms = [&](std::size_t j, std::size_t i, std::size_t d, std::size_t x, double scale) {
    const double len = p.interval(j, i).length();
    std::vector<LpTerm> terms;
    for (std::size_t k = 0; k < K; ++k) {
      if (p.interval_index(k, j) != i) continue;
      const double w = s.cell_measure(x, k) / len;
      if (w != 0.0) terms.push_back({s.var(k, d, x), scale * w});
    }
    return terms;
  };

  for (const auto& [j, dir] : r.um) {
    for (std::size_t x = 0; x < s.n_x(); ++x) {
      for (std::size_t d = 0; d < s.n_d(); ++d) {
        for (std::size_t i = 0; i + 1 < p.intervals(j); ++i) {
          auto terms = slab_terms(j, i, d, x, 1.0);
          auto upper = slab_terms(j, i + 1, d, x, -1.0);
          terms.insert(terms.end(), upper.begin(), upper.end());
          detail::add_signed_row(lp, std::move(terms), dir,
                                 tag("um", j) + "_s" + std::to_string(i) + "_d" + std::to_string(d) + "_x" +
                                     std::to_string(x));
          ++out.rows;
        }
      }
    }
  }

  const double inf = LinearProgram::kInfinity;
  for (std::size_t j : r.us) {
    const std::size_t slabs = p.intervals(j);
    std::vector<std::size_t> a(slabs * s.n_d()), b(s.n_d() * s.n_x());
    for (std::size_t i = 0; i < slabs; ++i) {
      for (std::size_t d = 0; d < s.n_d(); ++d) {
        a[i * s.n_d() + d] = lp.add_variable(tag("us", j) + "_s" + std::to_string(i) + "_d" + std::to_string(d),
                                             -inf, inf);
      }
    }
    for (std::size_t d = 0; d < s.n_d(); ++d) {
      for (std::size_t x = 0; x < s.n_x(); ++x) {
        b[d * s.n_x() + x] =
            lp.add_variable(tag("us", j) + "_d" + std::to_string(d) + "_x" + std::to_string(x), -inf, inf);
      }
    }
    out.aux_vars += a.size() + b.size();
    for (std::size_t x = 0; x < s.n_x(); ++x) {
      for (std::size_t d = 0; d < s.n_d(); ++d) {
        for (std::size_t i = 0; i < slabs; ++i) {
          auto terms = slab_terms(j, i, d, x, 1.0);
          terms.push_back({a[i * s.n_d() + d], -1.0});
          terms.push_back({b[d * s.n_x() + x], -1.0});
          lp.add_eq(std::move(terms), 0.0,
                    tag("us", j) + "_s" + std::to_string(i) + "_d" + std::to_string(d) + "_x" + std::to_string(x));
          ++out.rows;
        }
      }
    }
  }

  for (std::size_t j : r.cs) {
    // alpha_{k,d|x} = A_{k,d} + B_{proj_{-j}(k),d|x}.
    const std::size_t slabs = p.intervals(j);
    const std::size_t projections = K / slabs;
    auto proj = [&](std::size_t k) {
      const std::size_t hi = k / (p.stride(j) * slabs);
      const std::size_t lo = k % p.stride(j);
      return hi * p.stride(j) + lo;
    };
    std::vector<std::size_t> a(K * s.n_d()), b(projections * s.n_d() * s.n_x());
    for (std::size_t k = 0; k < K; ++k) {
      for (std::size_t d = 0; d < s.n_d(); ++d) {
        a[k * s.n_d() + d] =
            lp.add_variable(tag("cs", j) + "_c" + std::to_string(k) + "_d" + std::to_string(d), -inf, inf);
      }
    }
    for (std::size_t q = 0; q < projections; ++q) {
      for (std::size_t d = 0; d < s.n_d(); ++d) {
        for (std::size_t x = 0; x < s.n_x(); ++x) {
          b[(q * s.n_d() + d) * s.n_x() + x] = lp.add_variable(
              tag("cs", j) + "_p" + std::to_string(q) + "_d" + std::to_string(d) + "_x" + std::to_string(x), -inf,
              inf);
        }
      }
    }
    out.aux_vars += a.size() + b.size();
    for (std::size_t x = 0; x < s.n_x(); ++x) {
      for (std::size_t k = 0; k < K; ++k) {
        if (!positive(x, k)) continue;
        for (std::size_t d = 0; d < s.n_d(); ++d) {
          lp.add_eq({{s.var(k, d, x), 1.0}, {a[k * s.n_d() + d], -1.0}, {b[(proj(k) * s.n_d() + d) * s.n_x() + x], -1.0}},
                    0.0, tag("cs", j) + "_c" + std::to_string(k) + "_d" + std::to_string(d) + "_x" + std::to_string(x));
          ++out.rows;
        }
      }
    }
  }

  if (!r.cm.empty() || !r.cs.empty()) {
    out.notes.push_back(
        "piecewise-constant bounds are sharp only under bound, treatment-monotonicity, unconditional monotonicity "
        "and unconditional separability restrictions; conditional monotonicity and conditional separability are "
        "imposed as valid outer restrictions");
  }
}

inline void compile_shape_bernstein(const MtrSpace& s, LinearProgram& lp, const ShapeRestrictions& r,
                                    ShapeCompilation& out) {
  const BernsteinBasis& b = s.bernstein();
  const std::size_t K = s.K();
  const std::size_t G = b.grid_size();
  std::vector<std::vector<double>> at(G);
  for (std::size_t p = 0; p < G; ++p) at[p] = b.eval(b.grid_point(p));

  auto value_terms = [&](const std::vector<double>& coef, std::size_t d, std::size_t x, double scale) {
    std::vector<LpTerm> terms;
    for (std::size_t k = 0; k < K; ++k) {
      if (coef[k] != 0.0) terms.push_back({s.var(k, d, x), scale * coef[k]});
    }
    return terms;
  };

  if (r.bounds) {
    for (std::size_t x = 0; x < s.n_x(); ++x) {
      for (std::size_t d = 0; d < s.n_d(); ++d) {
        for (std::size_t p = 0; p < G; ++p) {
          const std::string sfx = "_g" + std::to_string(p) + "_d" + std::to_string(d) + "_x" + std::to_string(x);
          lp.add_le(value_terms(at[p], d, x, 1.0), r.bounds->second, "ub" + sfx);
          lp.add_le(value_terms(at[p], d, x, -1.0), -r.bounds->first, "lb" + sfx);
          out.rows += 2;
        }
      }
    }
  }

  for (const auto& [dh, dl] : r.md) {
    for (std::size_t x = 0; x < s.n_x(); ++x) {
      for (std::size_t p = 0; p < G; ++p) {
        auto terms = value_terms(at[p], dl, x, 1.0);
        auto hi = value_terms(at[p], dh, x, -1.0);
        terms.insert(terms.end(), hi.begin(), hi.end());
        lp.add_le(std::move(terms), 0.0,
                  "md_d" + std::to_string(dh) + "d" + std::to_string(dl) + "_g" + std::to_string(p) + "_x" +
                      std::to_string(x));
        ++out.rows;
      }
    }
  }

  for (const auto& [j, dir] : r.cm) {
    const std::size_t st = b.grid_stride(j);
    for (std::size_t x = 0; x < s.n_x(); ++x) {
      for (std::size_t d = 0; d < s.n_d(); ++d) {
        for (std::size_t p = 0; p < G; ++p) {
          if (b.grid_index(p)[j] + 1 >= b.grid_points()) continue;
          detail::add_signed_row(lp, detail::combine(at[p], at[p + st], s, d, x), dir,
                                 tag("cm", j) + "_g" + std::to_string(p) + "_d" + std::to_string(d) + "_x" +
                                     std::to_string(x));
          ++out.rows;
        }
      }
    }
  }

  // E[b_k(U) | U_j = t, X = x] on the grid values of dimension j.
  auto conditional = [&](std::size_t j, std::size_t x) {
    PointFunction f = [&b](std::span<const double> u, std::span<double> o) { b.eval(u, o); };
    std::vector<std::vector<double>> rows(b.grid_points());
    for (std::size_t i = 0; i < b.grid_points(); ++i) {
      rows[i] = conditional_expectation(s.dist(x), j, b.grid_value(i), f, K, s.quadrature());
    }
    return rows;
  };

  for (const auto& [j, dir] : r.um) {
    for (std::size_t x = 0; x < s.n_x(); ++x) {
      auto cond = conditional(j, x);
      for (std::size_t d = 0; d < s.n_d(); ++d) {
        for (std::size_t i = 0; i + 1 < b.grid_points(); ++i) {
          detail::add_signed_row(lp, detail::combine(cond[i], cond[i + 1], s, d, x), dir,
                                 tag("um", j) + "_t" + std::to_string(i) + "_d" + std::to_string(d) + "_x" +
                                     std::to_string(x));
          ++out.rows;
        }
      }
    }
  }

  const double inf = LinearProgram::kInfinity;
  for (std::size_t j : r.us) {
    const std::size_t T = b.grid_points();
    std::vector<std::size_t> a(T * s.n_d()), c(s.n_d() * s.n_x());
    for (std::size_t i = 0; i < T; ++i) {
      for (std::size_t d = 0; d < s.n_d(); ++d) {
        a[i * s.n_d() + d] =
            lp.add_variable(tag("us", j) + "_t" + std::to_string(i) + "_d" + std::to_string(d), -inf, inf);
      }
    }
    for (std::size_t d = 0; d < s.n_d(); ++d) {
      for (std::size_t x = 0; x < s.n_x(); ++x) {
        c[d * s.n_x() + x] =
            lp.add_variable(tag("us", j) + "_d" + std::to_string(d) + "_x" + std::to_string(x), -inf, inf);
      }
    }
    out.aux_vars += a.size() + c.size();
    for (std::size_t x = 0; x < s.n_x(); ++x) {
      auto cond = conditional(j, x);
      for (std::size_t d = 0; d < s.n_d(); ++d) {
        for (std::size_t i = 0; i < T; ++i) {
          auto terms = value_terms(cond[i], d, x, 1.0);
          terms.push_back({a[i * s.n_d() + d], -1.0});
          terms.push_back({c[d * s.n_x() + x], -1.0});
          lp.add_eq(std::move(terms), 0.0,
                    tag("us", j) + "_t" + std::to_string(i) + "_d" + std::to_string(d) + "_x" + std::to_string(x));
          ++out.rows;
        }
      }
    }
  }

  for (std::size_t j : r.cs) {
    // m_{d|x} - m_{d|x0} does not vary along dimension j.
    const std::size_t st = b.grid_stride(j);
    for (std::size_t x = 1; x < s.n_x(); ++x) {
      for (std::size_t d = 0; d < s.n_d(); ++d) {
        for (std::size_t p = 0; p < G; ++p) {
          if (b.grid_index(p)[j] + 1 >= b.grid_points()) continue;
          std::vector<LpTerm> terms;
          for (std::size_t k = 0; k < K; ++k) {
            const double diff = at[p][k] - at[p + st][k];
            if (diff == 0.0) continue;
            terms.push_back({s.var(k, d, x), diff});
            terms.push_back({s.var(k, d, 0), -diff});
          }
          if (terms.empty()) continue;
          lp.add_eq(std::move(terms), 0.0,
                    tag("cs", j) + "_g" + std::to_string(p) + "_d" + std::to_string(d) + "_x" + std::to_string(x));
          ++out.rows;
        }
      }
    }
  }
}

}  // namespace detail

inline ShapeCompilation compile_shape_constraints(const MtrSpace& space, LinearProgram& lp,
                                                  const ShapeRestrictions& r) {
  ShapeCompilation out;
  if (r.bounds && !(r.bounds->first <= r.bounds->second)) {
    throw std::invalid_argument("shape restrictions: lower bound exceeds upper bound");
  }
  for (const auto& [dh, dl] : r.md) {
    if (dh >= space.n_d() || dl >= space.n_d()) throw std::invalid_argument("shape restrictions: MD treatment out of range");
  }
  auto check_dim = [&](std::size_t j) {
    if (j >= space.dim()) throw std::invalid_argument("shape restrictions: dimension out of range");
  };
  for (const auto& e : r.cm) check_dim(e.first);
  for (const auto& e : r.um) check_dim(e.first);
  for (auto j : r.cs) check_dim(j);
  for (auto j : r.us) check_dim(j);
  if (space.mode() == BasisMode::PiecewiseConstant) {
    detail::compile_shape_piecewise(space, lp, r, out);
  } else {
    detail::compile_shape_bernstein(space, lp, r, out);
  }
  return out;
}

/// Adds sum_k alpha_{k,d|x} * weight * int_{set} b_k dF_x to the objective.
inline void add_objective_term(const MtrSpace& space, LinearProgram& lp, std::size_t x, std::size_t d, double weight,
                               const RectUnion& set) {
  if (weight == 0.0) return;
  auto coef = space.set_coefficients(set, x);
  for (std::size_t k = 0; k < coef.size(); ++k) lp.c[space.var(k, d, x)] += weight * coef[k];
}

/// Copy of lp without variables that appear in no row and have zero cost.
/// keep[j] is the new index of variable j, or npos when removed.
inline LinearProgram prune_unreferenced(const LinearProgram& lp, std::vector<std::size_t>* map = nullptr) {
  constexpr std::size_t npos = static_cast<std::size_t>(-1);
  std::vector<char> used(lp.num_vars(), 0);
  for (std::size_t j = 0; j < lp.num_vars(); ++j) used[j] = lp.c[j] != 0.0;
  for (const auto* block : {&lp.eq, &lp.le}) {
    for (const auto& row : *block) {
      for (const auto& t : row.terms) used[t.var] = 1;
    }
  }
  std::vector<std::size_t> idx(lp.num_vars(), npos);
  LinearProgram out;
  out.sense = lp.sense;
  for (std::size_t j = 0; j < lp.num_vars(); ++j) {
    if (!used[j]) continue;
    idx[j] = out.add_variable(lp.names[j], lp.lower[j], lp.upper[j], lp.c[j]);
  }
  auto remap = [&](const LpRow& row) {
    LpRow r{row.name, {}, row.rhs};
    for (const auto& t : row.terms) r.terms.push_back({idx[t.var], t.coef});
    return r;
  };
  for (const auto& row : lp.eq) out.eq.push_back(remap(row));
  for (const auto& row : lp.le) out.le.push_back(remap(row));
  if (map) *map = std::move(idx);
  return out;
}

}  // namespace mtebounds
