#pragma once

// Joint laws of the selection unobservables U on [0,1]^J and the measures
// they assign to rectangles.
//
// Every family has uniform marginals. The bivariate families are copulas;
// MultinomialLatent is the singular law on [0,1]^3 induced by a latent
// bivariate normal (or normal mixture) pair (V1, V2) through
//   U1 = Phi(V1), U2 = Phi(V2), U3 = F12(V1 - V2),
// with F12 the distribution function of V1 - V2.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <numeric>
#include <span>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include "mtebounds/bvn.hpp"
#include "mtebounds/geometry.hpp"
#include "mtebounds/normal.hpp"
#include "mtebounds/quadrature.hpp"

namespace mtebounds {

class DistributionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

struct Independence {
  std::size_t dim = 2;
};

struct GaussianCopula {
  double rho = 0.0;
};

struct GaussianMixtureCopula {
  std::vector<double> weights;
  std::vector<double> rhos;
};

struct MultinomialLatent {
  std::vector<double> weights;
  std::vector<double> rhos;
};

using UDistribution = std::variant<Independence, GaussianCopula, GaussianMixtureCopula, MultinomialLatent>;

namespace detail {

inline void check_mixture(const std::vector<double>& w, const std::vector<double>& rho, const char* what) {
  if (w.empty() || w.size() != rho.size()) {
    throw DistributionError(std::string(what) + ": weights and correlations must be nonempty and of equal length");
  }
  double total = 0.0;
  for (std::size_t m = 0; m < w.size(); ++m) {
    if (!(w[m] >= 0.0)) throw DistributionError(std::string(what) + ": negative mixture weight");
    if (!(rho[m] > -1.0 && rho[m] < 1.0)) {
      throw DistributionError(std::string(what) + ": component correlations must lie in (-1, 1)");
    }
    total += w[m];
  }
  if (std::abs(total - 1.0) > 1e-12) throw DistributionError(std::string(what) + ": weights must sum to 1");
}

}  // namespace detail

inline UDistribution make_independence(std::size_t dim) {
  if (dim == 0) throw DistributionError("independence: dimension must be positive");
  return Independence{dim};
}

inline UDistribution make_gaussian_copula(double rho) {
  if (!(rho >= -1.0 && rho <= 1.0)) throw DistributionError("gaussian copula: rho must lie in [-1, 1]");
  return GaussianCopula{rho};
}

inline UDistribution make_gaussian_mixture_copula(std::vector<double> weights, std::vector<double> rhos) {
  detail::check_mixture(weights, rhos, "gaussian mixture copula");
  return GaussianMixtureCopula{std::move(weights), std::move(rhos)};
}

inline UDistribution make_multinomial_probit(double rho) {
  std::vector<double> w{1.0}, r{rho};
  detail::check_mixture(w, r, "multinomial probit");
  return MultinomialLatent{std::move(w), std::move(r)};
}

inline UDistribution make_multinomial_probit_mixture(std::vector<double> weights, std::vector<double> rhos) {
  detail::check_mixture(weights, rhos, "multinomial probit mixture");
  return MultinomialLatent{std::move(weights), std::move(rhos)};
}

inline std::size_t dimension(const UDistribution& dist) {
  return std::visit(
      [](const auto& d) -> std::size_t {
        using T = std::decay_t<decltype(d)>;
        if constexpr (std::is_same_v<T, Independence>) {
          return d.dim;
        } else if constexpr (std::is_same_v<T, MultinomialLatent>) {
          return 3;
        } else {
          return 2;
        }
      },
      dist);
}

/// Bivariate normal copula C(u, v); rho = +-1 are the comonotone and
/// countermonotone bounds.
inline double gaussian_copula_cdf(double u, double v, double rho) {
  u = std::clamp(u, 0.0, 1.0);
  v = std::clamp(v, 0.0, 1.0);
  if (u == 0.0 || v == 0.0) return 0.0;
  if (u == 1.0) return v;
  if (v == 1.0) return u;
  if (rho >= 1.0) return std::min(u, v);
  if (rho <= -1.0) return std::max(u + v - 1.0, 0.0);
  return bvn_cdf(normal_quantile(u), normal_quantile(v), rho);
}

/// Joint distribution function of (U1, U2) for the bivariate families.
inline double copula_cdf(const UDistribution& dist, double u, double v) {
  return std::visit(
      [&](const auto& d) -> double {
        using T = std::decay_t<decltype(d)>;
        if constexpr (std::is_same_v<T, Independence>) {
          if (d.dim != 2) throw DistributionError("copula_cdf: independence law is not bivariate");
          return std::clamp(u, 0.0, 1.0) * std::clamp(v, 0.0, 1.0);
        } else if constexpr (std::is_same_v<T, GaussianCopula>) {
          return gaussian_copula_cdf(u, v, d.rho);
        } else if constexpr (std::is_same_v<T, GaussianMixtureCopula>) {
          double c = 0.0;
          for (std::size_t m = 0; m < d.weights.size(); ++m) c += d.weights[m] * gaussian_copula_cdf(u, v, d.rhos[m]);
          return c;
        } else {
          throw DistributionError("copula_cdf: the multinomial latent law is trivariate");
        }
      },
      dist);
}

// --- latent difference V1 - V2 of the multinomial law ----------------------

inline double latent_difference_sd(double rho) { return std::sqrt(2.0 - 2.0 * rho); }

inline double latent_difference_cdf(const MultinomialLatent& d, double s) {
  if (s == kInf) return 1.0;
  if (s == -kInf) return 0.0;
  double f = 0.0;
  for (std::size_t m = 0; m < d.weights.size(); ++m) f += d.weights[m] * normal_cdf(s / latent_difference_sd(d.rhos[m]));
  return f;
}

/// Inverse of latent_difference_cdf; closed form for a single component,
/// bisection to 1e-12 otherwise.
inline double latent_difference_quantile(const MultinomialLatent& d, double p) {
  if (p <= 0.0) return -kInf;
  if (p >= 1.0) return kInf;
  if (d.weights.size() == 1) return latent_difference_sd(d.rhos[0]) * normal_quantile(p);
  double lo = -1.0, hi = 1.0;
  while (latent_difference_cdf(d, lo) > p) lo *= 2.0;
  while (latent_difference_cdf(d, hi) < p) hi *= 2.0;
  while (hi - lo > 1e-12 * std::max(1.0, std::abs(lo))) {
    const double mid = 0.5 * (lo + hi);
    if (latent_difference_cdf(d, mid) < p) {
      lo = mid;
    } else {
      hi = mid;
    }
    if (mid == lo && mid == hi) break;
  }
  return 0.5 * (lo + hi);
}

namespace detail {

/// Standard normal truncation half-width for numerical integration;
/// the omitted tail mass is below 1e-32.
inline constexpr double kNormalSpan = 12.0;

/// Phi(h) - Phi(l), computed on the side that avoids cancellation.
inline double normal_mass(double l, double h) {
  if (!(h > l)) return 0.0;
  if (l > 0.0) return normal_cdf(-l) - normal_cdf(-h);
  return normal_cdf(h) - normal_cdf(l);
}

struct LatentBox {
  double lo1, hi1;  // V1 range
  double lo2, hi2;  // V2 range
  double d_lo, d_hi;  // range of V1 - V2
};

inline LatentBox latent_box(const MultinomialLatent& d, const Rect& r) {
  return {normal_quantile(r[0].lo), normal_quantile(r[0].hi), normal_quantile(r[1].lo),
          normal_quantile(r[1].hi), latent_difference_quantile(d, r[2].lo), latent_difference_quantile(d, r[2].hi)};
}

/// Values of v1 where the admissible v2 interval changes shape.
inline std::vector<double> latent_kinks(const LatentBox& b) {
  return {b.lo2 + b.d_hi, b.hi2 + b.d_lo, b.lo2 + b.d_lo, b.hi2 + b.d_hi};
}

inline double rect_measure_multinomial(const MultinomialLatent& d, const Rect& r, const QuadratureOptions& opt) {
  const LatentBox b = latent_box(d, r);
  const double a = std::max(b.lo1, -kNormalSpan);
  const double c = std::min(b.hi1, kNormalSpan);
  if (!(c > a)) return 0.0;
  double total = 0.0;
  for (std::size_t m = 0; m < d.weights.size(); ++m) {
    if (d.weights[m] == 0.0) continue;
    const double rho = d.rhos[m];
    const double s = std::sqrt((1.0 - rho) * (1.0 + rho));
    auto integrand = [&](double v1) {
      const double lo = std::max(b.lo2, v1 - b.d_hi);
      const double hi = std::min(b.hi2, v1 - b.d_lo);
      if (!(hi > lo)) return 0.0;
      return normal_pdf(v1) * normal_mass((lo - rho * v1) / s, (hi - rho * v1) / s);
    };
    total += d.weights[m] * integrate_split(integrand, a, c, latent_kinks(b), opt);
  }
  return std::clamp(total, 0.0, 1.0);
}

}  // namespace detail

/// P(U in r).
inline double rect_measure(const UDistribution& dist, const Rect& r, const QuadratureOptions& opt = {}) {
  if (r.dim() != dimension(dist)) throw DistributionError("rect_measure: dimension mismatch");
  if (r.degenerate()) return 0.0;
  return std::visit(
      [&](const auto& d) -> double {
        using T = std::decay_t<decltype(d)>;
        if constexpr (std::is_same_v<T, Independence>) {
          return r.volume();
        } else if constexpr (std::is_same_v<T, MultinomialLatent>) {
          return detail::rect_measure_multinomial(d, r, opt);
        } else {
          const double m = copula_cdf(dist, r[0].hi, r[1].hi) - copula_cdf(dist, r[0].lo, r[1].hi) -
                           copula_cdf(dist, r[0].hi, r[1].lo) + copula_cdf(dist, r[0].lo, r[1].lo);
          return std::clamp(m, 0.0, 1.0);
        }
      },
      dist);
}

/// P(U in s) for a union whose members have disjoint interiors.
inline double measure(const UDistribution& dist, const RectUnion& s, const QuadratureOptions& opt = {}) {
  if (s.dim() != dimension(dist)) throw DistributionError("measure: dimension mismatch");
  double total = 0.0;
  for (const auto& r : s.rects()) total += rect_measure(dist, r, opt);
  return total;
}

/// P(U in r | U_j in s). U_j is uniform, so the conditioning mass is the
/// length of s. Throws on a zero-length conditioning interval.
inline double cond_prob(const UDistribution& dist, const Rect& r, std::size_t j, Interval s,
                        const QuadratureOptions& opt = {}) {
  if (j >= r.dim()) throw DistributionError("cond_prob: conditioning dimension out of range");
  if (!(s.length() > 0.0)) throw DistributionError("cond_prob: zero-length conditioning interval");
  std::vector<Interval> slab(r.dim(), Interval{0.0, 1.0});
  slab[j] = s;
  auto meet = r.intersect(Rect(std::move(slab)));
  if (!meet) return 0.0;
  return rect_measure(dist, *meet, opt) / s.length();
}

// --- expectations of functions of U ---------------------------------------

/// f(u, out): evaluates n_out functions at the point u in [0,1]^J.
using PointFunction = std::function<void(std::span<const double>, std::span<double>)>;

namespace detail {

inline void nested_uniform(const Rect& r, std::size_t level, std::vector<double>& u, const PointFunction& f,
                           std::span<double> out, std::size_t n_out, const QuadratureOptions& opt) {
  if (level == r.dim()) {
    f(u, out);
    return;
  }
  auto inner = [&](double x, std::span<double> o) {
    u[level] = x;
    nested_uniform(r, level + 1, u, f, o, n_out, opt);
  };
  auto res = integrate_vector(inner, r[level].lo, r[level].hi, n_out, opt);
  std::copy(res.value.begin(), res.value.end(), out.begin());
}

/// E[f(U) 1{U in r}] for the Gaussian copula with |rho| < 1, on the normal
/// scale: outer over x1 with weight phi(x1), inner over x2 | x1.
inline std::vector<double> gaussian_expectation(double rho, const Rect& r, const PointFunction& f, std::size_t n_out,
                                                const QuadratureOptions& opt) {
  std::vector<double> out(n_out, 0.0);
  if (rho >= 1.0 || rho <= -1.0) {
    // Singular: U2 = U1 or U2 = 1 - U1.
    double lo, hi;
    if (rho >= 1.0) {
      lo = std::max(r[0].lo, r[1].lo);
      hi = std::min(r[0].hi, r[1].hi);
    } else {
      lo = std::max(r[0].lo, 1.0 - r[1].hi);
      hi = std::min(r[0].hi, 1.0 - r[1].lo);
    }
    if (!(hi > lo)) return out;
    std::vector<double> u(2);
    auto g = [&](double t, std::span<double> o) {
      u[0] = t;
      u[1] = rho >= 1.0 ? t : 1.0 - t;
      f(u, o);
    };
    return integrate_vector(g, lo, hi, n_out, opt).value;
  }
  const double s = std::sqrt((1.0 - rho) * (1.0 + rho));
  const double a1 = std::max(normal_quantile(r[0].lo), -kNormalSpan);
  const double b1 = std::min(normal_quantile(r[0].hi), kNormalSpan);
  const double a2 = normal_quantile(r[1].lo);
  const double b2 = normal_quantile(r[1].hi);
  if (!(b1 > a1)) return out;
  QuadratureOptions inner_opt = opt;
  inner_opt.abs_tol = opt.abs_tol * 0.1;
  std::vector<double> u(2);
  auto outer = [&](double x1, std::span<double> o) {
    const double mu = rho * x1;
    const double lo = std::max(a2, mu - kNormalSpan * s);
    const double hi = std::min(b2, mu + kNormalSpan * s);
    if (!(hi > lo)) return;
    const double w1 = normal_pdf(x1);
    auto inner = [&](double x2, std::span<double> oi) {
      u[0] = normal_cdf(x1);
      u[1] = normal_cdf(x2);
      f(u, oi);
      const double w = w1 * normal_pdf((x2 - mu) / s) / s;
      for (auto& v : oi) v *= w;
    };
    auto res = integrate_vector(inner, lo, hi, n_out, inner_opt);
    std::copy(res.value.begin(), res.value.end(), o.begin());
  };
  return integrate_vector(outer, a1, b1, n_out, opt).value;
}

inline std::vector<double> multinomial_expectation(const MultinomialLatent& d, const Rect& r, const PointFunction& f,
                                                   std::size_t n_out, const QuadratureOptions& opt) {
  std::vector<double> out(n_out, 0.0);
  const LatentBox b = latent_box(d, r);
  const double a1 = std::max(b.lo1, -kNormalSpan);
  const double c1 = std::min(b.hi1, kNormalSpan);
  if (!(c1 > a1)) return out;
  QuadratureOptions inner_opt = opt;
  inner_opt.abs_tol = opt.abs_tol * 0.1;
  std::vector<double> u(3);
  for (std::size_t m = 0; m < d.weights.size(); ++m) {
    if (d.weights[m] == 0.0) continue;
    const double rho = d.rhos[m];
    const double s = std::sqrt((1.0 - rho) * (1.0 + rho));
    auto outer = [&](double v1, std::span<double> o) {
      const double mu = rho * v1;
      const double lo = std::max({b.lo2, v1 - b.d_hi, mu - kNormalSpan * s});
      const double hi = std::min({b.hi2, v1 - b.d_lo, mu + kNormalSpan * s});
      if (!(hi > lo)) return;
      const double w1 = normal_pdf(v1);
      auto inner = [&](double v2, std::span<double> oi) {
        u[0] = normal_cdf(v1);
        u[1] = normal_cdf(v2);
        u[2] = latent_difference_cdf(d, v1 - v2);
        f(u, oi);
        const double w = w1 * normal_pdf((v2 - mu) / s) / s;
        for (auto& v : oi) v *= w;
      };
      auto res = integrate_vector(inner, lo, hi, n_out, inner_opt);
      std::copy(res.value.begin(), res.value.end(), o.begin());
    };
    auto res = integrate_vector_split(outer, a1, c1, latent_kinks(b), n_out, opt);
    for (std::size_t k = 0; k < n_out; ++k) out[k] += d.weights[m] * res.value[k];
  }
  return out;
}

}  // namespace detail

/// E[f(U) 1{U in r}] for n_out functions at once.
inline std::vector<double> rect_expectation(const UDistribution& dist, const Rect& r, const PointFunction& f,
                                            std::size_t n_out, const QuadratureOptions& opt = {}) {
  if (r.dim() != dimension(dist)) throw DistributionError("rect_expectation: dimension mismatch");
  if (r.degenerate()) return std::vector<double>(n_out, 0.0);
  return std::visit(
      [&](const auto& d) -> std::vector<double> {
        using T = std::decay_t<decltype(d)>;
        if constexpr (std::is_same_v<T, Independence>) {
          std::vector<double> u(r.dim()), out(n_out, 0.0);
          detail::nested_uniform(r, 0, u, f, out, n_out, opt);
          return out;
        } else if constexpr (std::is_same_v<T, GaussianCopula>) {
          return detail::gaussian_expectation(d.rho, r, f, n_out, opt);
        } else if constexpr (std::is_same_v<T, GaussianMixtureCopula>) {
          std::vector<double> out(n_out, 0.0);
          for (std::size_t m = 0; m < d.weights.size(); ++m) {
            auto part = detail::gaussian_expectation(d.rhos[m], r, f, n_out, opt);
            for (std::size_t k = 0; k < n_out; ++k) out[k] += d.weights[m] * part[k];
          }
          return out;
        } else {
          return detail::multinomial_expectation(d, r, f, n_out, opt);
        }
      },
      dist);
}

/// E[f(U) | U_j = t]. Endpoints t in {0, 1} are evaluated as one-sided
/// limits at distance 1e-12.
inline std::vector<double> conditional_expectation(const UDistribution& dist, std::size_t j, double t,
                                                   const PointFunction& f, std::size_t n_out,
                                                   const QuadratureOptions& opt = {}) {
  const std::size_t J = dimension(dist);
  if (j >= J) throw DistributionError("conditional_expectation: dimension out of range");
  t = std::clamp(t, 1e-12, 1.0 - 1e-12);
  std::vector<double> out(n_out, 0.0);

  auto gaussian = [&](double rho, double weight) {
    std::vector<double> u(2);
    const std::size_t other = 1 - j;
    if (rho >= 1.0 || rho <= -1.0) {
      u[j] = t;
      u[other] = rho >= 1.0 ? t : 1.0 - t;
      std::vector<double> o(n_out, 0.0);
      f(u, o);
      for (std::size_t k = 0; k < n_out; ++k) out[k] += weight * o[k];
      return;
    }
    const double s = std::sqrt((1.0 - rho) * (1.0 + rho));
    const double mu = rho * normal_quantile(t);
    auto g = [&](double x, std::span<double> o) {
      u[j] = t;
      u[other] = normal_cdf(x);
      f(u, o);
      const double w = normal_pdf((x - mu) / s) / s;
      for (auto& v : o) v *= w;
    };
    auto res = integrate_vector(g, mu - detail::kNormalSpan * s, mu + detail::kNormalSpan * s, n_out, opt);
    for (std::size_t k = 0; k < n_out; ++k) out[k] += weight * res.value[k];
  };

  std::visit(
      [&](const auto& d) {
        using T = std::decay_t<decltype(d)>;
        if constexpr (std::is_same_v<T, Independence>) {
          std::vector<Interval> sides(J, Interval{0.0, 1.0});
          sides[j] = Interval{t, t};
          // Integrate the remaining coordinates with u_j pinned.
          std::vector<double> u(J);
          std::vector<Interval> free_sides;
          std::vector<std::size_t> free_dims;
          for (std::size_t i = 0; i < J; ++i) {
            if (i != j) {
              free_sides.push_back(Interval{0.0, 1.0});
              free_dims.push_back(i);
            }
          }
          if (free_dims.empty()) {
            u[j] = t;
            f(u, out);
            return;
          }
          Rect box(free_sides);
          PointFunction g = [&](std::span<const double> v, std::span<double> o) {
            for (std::size_t i = 0; i < free_dims.size(); ++i) u[free_dims[i]] = v[i];
            u[j] = t;
            f(u, o);
          };
          std::vector<double> v(free_dims.size());
          detail::nested_uniform(box, 0, v, g, out, n_out, opt);
        } else if constexpr (std::is_same_v<T, GaussianCopula>) {
          gaussian(d.rho, 1.0);
        } else if constexpr (std::is_same_v<T, GaussianMixtureCopula>) {
          // Every component has uniform marginals, so the posterior
          // component weights given U_j equal the prior weights.
          for (std::size_t m = 0; m < d.weights.size(); ++m) gaussian(d.rhos[m], d.weights[m]);
        } else {
          std::vector<double> u(3);
          if (j < 2) {
            const double fixed = normal_quantile(t);
            for (std::size_t m = 0; m < d.weights.size(); ++m) {
              const double rho = d.rhos[m];
              const double s = std::sqrt((1.0 - rho) * (1.0 + rho));
              const double mu = rho * fixed;
              auto g = [&](double x, std::span<double> o) {
                const double v1 = j == 0 ? fixed : x;
                const double v2 = j == 0 ? x : fixed;
                u[0] = normal_cdf(v1);
                u[1] = normal_cdf(v2);
                u[2] = latent_difference_cdf(d, v1 - v2);
                f(u, o);
                const double w = normal_pdf((x - mu) / s) / s;
                for (auto& v : o) v *= w;
              };
              auto res = integrate_vector(g, mu - detail::kNormalSpan * s, mu + detail::kNormalSpan * s, n_out, opt);
              for (std::size_t k = 0; k < n_out; ++k) out[k] += d.weights[m] * res.value[k];
            }
          } else {
            const double diff = latent_difference_quantile(d, t);
            std::vector<double> post(d.weights.size());
            double total = 0.0;
            for (std::size_t m = 0; m < d.weights.size(); ++m) {
              const double sd = latent_difference_sd(d.rhos[m]);
              post[m] = d.weights[m] * normal_pdf(diff / sd) / sd;
              total += post[m];
            }
            for (std::size_t m = 0; m < d.weights.size(); ++m) {
              if (post[m] == 0.0) continue;
              const double rho = d.rhos[m];
              const double mu = 0.5 * diff;
              const double s = std::sqrt(0.5 * (1.0 + rho));
              auto g = [&](double v1, std::span<double> o) {
                u[0] = normal_cdf(v1);
                u[1] = normal_cdf(v1 - diff);
                u[2] = t;
                f(u, o);
                const double w = normal_pdf((v1 - mu) / s) / s;
                for (auto& v : o) v *= w;
              };
              auto res = integrate_vector(g, mu - detail::kNormalSpan * s, mu + detail::kNormalSpan * s, n_out, opt);
              for (std::size_t k = 0; k < n_out; ++k) out[k] += post[m] / total * res.value[k];
            }
          }
        }
      },
      dist);
  return out;
}

}  // namespace mtebounds
