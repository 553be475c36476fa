#pragma once

// Threshold-crossing selection models: region encodings, policy shifts and
// point identification of thresholds from choice probabilities.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <limits>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "mtebounds/bvn.hpp"
#include "mtebounds/distributions.hpp"
#include "mtebounds/geometry.hpp"
#include "mtebounds/normal.hpp"

namespace mtebounds {

enum class ModelKind { Binary, Sequential, DoubleHurdle, Multinomial };

inline const char* to_string(ModelKind k) {
  switch (k) {
    case ModelKind::Binary: return "binary";
    case ModelKind::Sequential: return "sequential";
    case ModelKind::DoubleHurdle: return "double_hurdle";
    case ModelKind::Multinomial: return "multinomial";
  }
  return "?";
}

class SelectionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Raised when a shifted normalized threshold leaves [0,1].
class ShiftError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Instrument z is factored as z = z1 * n_z2 + z2 for the double hurdle
/// model, where z1 moves only g_1 and z2 only g_2.
struct SelectionModel {
  ModelKind kind = ModelKind::Binary;
  std::size_t n_z = 1;
  std::size_t n_x = 1;
  std::size_t n_z1 = 0;
  std::size_t n_z2 = 0;
  std::size_t anchor_z1 = 0;
  /// Known value of g_1 at anchor_z1, common to every covariate cell.
  double anchor = 0.5;

  std::size_t n_d() const {
    switch (kind) {
      case ModelKind::Binary: return 2;
      case ModelKind::Sequential: return 3;
      case ModelKind::DoubleHurdle: return 2;
      case ModelKind::Multinomial: return 3;
    }
    return 0;
  }

  std::size_t dim() const {
    switch (kind) {
      case ModelKind::Binary: return 1;
      case ModelKind::Sequential: return 2;
      case ModelKind::DoubleHurdle: return 2;
      case ModelKind::Multinomial: return 3;
    }
    return 0;
  }

  std::size_t z1_of(std::size_t z) const { return z / n_z2; }
  std::size_t z2_of(std::size_t z) const { return z % n_z2; }
  std::size_t z_of(std::size_t z1, std::size_t z2) const { return z1 * n_z2 + z2; }

  void check() const {
    if (n_z == 0 || n_x == 0) throw SelectionError("selection model: empty instrument or covariate support");
    if (kind == ModelKind::DoubleHurdle) {
      if (n_z1 == 0 || n_z2 == 0 || n_z1 * n_z2 != n_z) {
        throw SelectionError("double hurdle: instrument support must factor as n_z1 x n_z2");
      }
      if (anchor_z1 >= n_z1) throw SelectionError("double hurdle: anchor instrument point out of range");
      if (!(anchor >= 0.0 && anchor <= 1.0)) throw SelectionError("double hurdle: anchor value must lie in [0,1]");
    }
  }
};

/// Normalized thresholds g[x][z][j]; for the multinomial model also the
/// latent-scale pair tilde[x][z] with g = (Phi(t1), Phi(t2), F12(t1 - t2)).
struct Thresholds {
  std::vector<std::vector<std::vector<double>>> g;
  std::vector<std::vector<std::array<double, 2>>> tilde;
};

/// Choice probabilities P_{d|z,x}, indexed [x][z][d].
using ChoiceProbs = std::vector<std::vector<std::vector<double>>>;

/// Threshold shifts. Normalized shifts are indexed [x][z][j] over the
/// model's J dimensions; tilde shifts [x][z][j] over the two latent
/// thresholds of the multinomial model.
struct PolicyShift {
  enum class Scale { Normalized, Tilde };
  Scale scale = Scale::Normalized;
  std::vector<std::vector<std::vector<double>>> delta;

  static PolicyShift zero(const SelectionModel& m) {
    PolicyShift s;
    s.scale = m.kind == ModelKind::Multinomial ? Scale::Tilde : Scale::Normalized;
    const std::size_t J = m.kind == ModelKind::Multinomial ? 2 : m.dim();
    s.delta.assign(m.n_x, std::vector<std::vector<double>>(m.n_z, std::vector<double>(J, 0.0)));
    return s;
  }
};

/// Normalized thresholds of the multinomial model from the latent pair.
inline std::array<double, 3> multinomial_normalized(const MultinomialLatent& d, double t1, double t2) {
  return {normal_cdf(t1), normal_cdf(t2), latent_difference_cdf(d, t1 - t2)};
}

/// Selection regions U_{d,z|x}(g) for every treatment d.
inline std::vector<RectUnion> regions(const SelectionModel& model, const Thresholds& th, std::size_t z,
                                      std::size_t x) {
  const auto& g = th.g.at(x).at(z);
  const std::size_t J = model.dim();
  if (g.size() != J) throw SelectionError("regions: threshold vector has the wrong dimension");
  auto R = [](std::initializer_list<Interval> s) { return Rect(std::vector<Interval>(s)); };
  std::vector<RectUnion> out(model.n_d(), RectUnion(J));
  switch (model.kind) {
    case ModelKind::Binary:
      out[1].add(R({{0.0, g[0]}}));
      out[0].add(R({{g[0], 1.0}}));
      break;
    case ModelKind::Sequential:
      out[0].add(R({{g[0], 1.0}, {0.0, 1.0}}));
      out[1].add(R({{0.0, g[0]}, {g[1], 1.0}}));
      out[2].add(R({{0.0, g[0]}, {0.0, g[1]}}));
      break;
    case ModelKind::DoubleHurdle:
      out[1].add(R({{0.0, g[0]}, {0.0, g[1]}}));
      out[0].add(R({{g[0], 1.0}, {0.0, 1.0}}));
      out[0].add(R({{0.0, g[0]}, {g[1], 1.0}}));
      break;
    case ModelKind::Multinomial:
      out[0].add(R({{g[0], 1.0}, {g[1], 1.0}, {0.0, 1.0}}));
      out[1].add(R({{0.0, g[0]}, {0.0, 1.0}, {0.0, g[2]}}));
      out[2].add(R({{0.0, 1.0}, {0.0, g[1]}, {g[2], 1.0}}));
      break;
  }
  return out;
}

/// Choice probabilities implied by thresholds, by measuring the regions.
inline ChoiceProbs forward_choice_probs(const SelectionModel& model, const Thresholds& th,
                                        const std::vector<UDistribution>& dists, const QuadratureOptions& q = {}) {
  ChoiceProbs p(model.n_x, std::vector<std::vector<double>>(model.n_z));
  for (std::size_t x = 0; x < model.n_x; ++x) {
    for (std::size_t z = 0; z < model.n_z; ++z) {
      for (const auto& reg : regions(model, th, z, x)) p[x][z].push_back(measure(dists.at(x), reg, q));
    }
  }
  return p;
}

/// Thresholds shifted by delta. Multinomial shifts act on the latent pair and
/// the normalized thresholds are recomputed from the shifted pair.
inline Thresholds shift(const SelectionModel& model, const Thresholds& th, const PolicyShift& s,
                        const std::vector<UDistribution>& dists) {
  const bool multinomial = model.kind == ModelKind::Multinomial;
  if (multinomial && s.scale != PolicyShift::Scale::Tilde) {
    throw ShiftError("multinomial model accepts only latent-scale shifts");
  }
  if (!multinomial && s.scale != PolicyShift::Scale::Normalized) {
    throw ShiftError("latent-scale shifts apply only to the multinomial model");
  }
  if (s.delta.size() != model.n_x) throw ShiftError("shift: covariate dimension mismatch");
  Thresholds out = th;
  for (std::size_t x = 0; x < model.n_x; ++x) {
    if (s.delta[x].size() != model.n_z) throw ShiftError("shift: instrument dimension mismatch");
    for (std::size_t z = 0; z < model.n_z; ++z) {
      const auto& dz = s.delta[x][z];
      if (multinomial) {
        if (dz.size() != 2) throw ShiftError("shift: latent shifts need two components");
        auto& t = out.tilde.at(x).at(z);
        t[0] += dz[0];
        t[1] += dz[1];
        const auto& ml = std::get<MultinomialLatent>(dists.at(x));
        auto g = multinomial_normalized(ml, t[0], t[1]);
        out.g[x][z].assign(g.begin(), g.end());
      } else {
        if (dz.size() != model.dim()) throw ShiftError("shift: wrong number of components");
        for (std::size_t j = 0; j < dz.size(); ++j) {
          const double v = out.g[x][z][j] + dz[j];
          if (!(v >= 0.0 && v <= 1.0)) {
            std::ostringstream os;
            os << "shifted threshold g_" << j + 1 << " at z=" << z << ", x=" << x << " is " << v
               << ", outside [0,1]";
            throw ShiftError(os.str());
          }
          out.g[x][z][j] = v;
        }
      }
    }
  }
  return out;
}

struct IdentifyOptions {
  double eps_feas = 1e-8;
  double arg_tol = 1e-12;
  int newton_max_iter = 200;
  QuadratureOptions quad{};
};

enum class IdentifyStatus { Identified, Rejected, NumericalFailure };

struct IdentifyResult {
  IdentifyStatus status = IdentifyStatus::Identified;
  Thresholds thresholds;
  double max_residual = 0.0;
  std::size_t d = 0, z = 0, x = 0;
  std::string message;

  bool ok() const { return status == IdentifyStatus::Identified; }
};

namespace detail {

/// Root of an increasing function f(t) = target on [lo, hi]; clamps to the
/// bracket when the target is out of range.
template <class F>
double bisect_increasing(F&& f, double target, double lo, double hi, double tol) {
  for (int it = 0; it < 400 && hi - lo > tol; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (mid <= lo || mid >= hi) break;
    if (f(mid) < target) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  return 0.5 * (lo + hi);
}

/// (P0, P1, P2) of the multinomial model at latent thresholds (t1, t2).
inline std::array<double, 3> multinomial_probs(const MultinomialLatent& d, double t1, double t2) {
  double p0 = 0.0, p1 = 0.0;
  for (std::size_t m = 0; m < d.weights.size(); ++m) {
    const double rho = d.rhos[m];
    const double sd = latent_difference_sd(rho);
    p0 += d.weights[m] * bvn_cdf(-t1, -t2, rho);
    p1 += d.weights[m] * bvn_cdf(t1, (t1 - t2) / sd, std::sqrt(0.5 * (1.0 - rho)));
  }
  return {p0, p1, 1.0 - p0 - p1};
}

/// Solves multinomial_probs(t) = (p0, p1, .) for the latent pair. Returns
/// false when neither Newton nor the nested bisection reaches the residual
/// target.
inline bool solve_multinomial(const MultinomialLatent& d, double p0, double p1, std::array<double, 2>& t,
                              int max_iter) {
  auto F = [&](double a, double b) {
    auto p = multinomial_probs(d, a, b);
    return std::array<double, 2>{p[0] - p0, p[1] - p1};
  };
  auto norm = [](const std::array<double, 2>& v) { return std::max(std::abs(v[0]), std::abs(v[1])); };
  constexpr double kTarget = 1e-13;

  const double q = normal_quantile(1.0 - std::sqrt(p0));
  t = {q, q};
  auto f = F(t[0], t[1]);
  for (int it = 0; it < max_iter && norm(f) > kTarget; ++it) {
    const double h = 1e-6;
    auto fa = F(t[0] + h, t[1]), fb = F(t[0] - h, t[1]);
    auto ga = F(t[0], t[1] + h), gb = F(t[0], t[1] - h);
    const double j00 = (fa[0] - fb[0]) / (2 * h), j10 = (fa[1] - fb[1]) / (2 * h);
    const double j01 = (ga[0] - gb[0]) / (2 * h), j11 = (ga[1] - gb[1]) / (2 * h);
    const double det = j00 * j11 - j01 * j10;
    if (!(std::abs(det) > 1e-300)) break;
    const double s0 = -(j11 * f[0] - j01 * f[1]) / det;
    const double s1 = -(-j10 * f[0] + j00 * f[1]) / det;
    double step = 1.0;
    bool improved = false;
    for (int k = 0; k < 40; ++k, step *= 0.5) {
      auto fn = F(t[0] + step * s0, t[1] + step * s1);
      if (std::isfinite(fn[0]) && std::isfinite(fn[1]) && norm(fn) < norm(f)) {
        t = {t[0] + step * s0, t[1] + step * s1};
        f = fn;
        improved = true;
        break;
      }
    }
    if (!improved || std::max(std::abs(step * s0), std::abs(step * s1)) < 1e-15) break;
  }
  if (norm(f) <= 1e-11) return true;

  // Nested bisection. For fixed t1, P0 decreases in t2 from 1 - Phi(t1) to 0;
  // along the resulting curve P1 increases in t1 from 0 to 1 - p0.
  constexpr double kSpan = 40.0;
  const double t1_max = normal_quantile(1.0 - p0);
  auto t2_of = [&](double t1) {
    return bisect_increasing([&](double t2) { return -multinomial_probs(d, t1, t2)[0]; }, -p0, -kSpan, kSpan,
                             1e-14);
  };
  const double t1 = bisect_increasing([&](double a) { return multinomial_probs(d, a, t2_of(a))[1]; }, p1,
                                      -kSpan, std::min(t1_max, kSpan), 1e-14);
  t = {t1, t2_of(t1)};
  return norm(F(t[0], t[1])) <= 1e-10;
}

}  // namespace detail

/// Recovers thresholds from choice probabilities p[x][z][d] under the
/// given per-covariate distributions. Any solution is checked forward
/// against every moment; a mismatch beyond eps_feas rejects.
inline IdentifyResult identify_thresholds(const SelectionModel& model, const std::vector<UDistribution>& dists,
                                          const ChoiceProbs& p, const IdentifyOptions& opt = {}) {
  model.check();
  IdentifyResult res;
  if (dists.size() != model.n_x) throw SelectionError("identify: one distribution per covariate cell required");
  if (p.size() != model.n_x) throw SelectionError("identify: choice probabilities have the wrong shape");
  for (std::size_t x = 0; x < model.n_x; ++x) {
    if (dimension(dists[x]) != model.dim()) {
      throw SelectionError("identify: distribution dimension does not match the selection model");
    }
    const bool latent = std::holds_alternative<MultinomialLatent>(dists[x]);
    if (latent != (model.kind == ModelKind::Multinomial)) {
      throw SelectionError("identify: the multinomial model requires the multinomial latent law and vice versa");
    }
    if (p[x].size() != model.n_z) throw SelectionError("identify: choice probabilities have the wrong shape");
    for (const auto& pz : p[x]) {
      if (pz.size() != model.n_d()) throw SelectionError("identify: choice probabilities have the wrong shape");
    }
  }

  const std::size_t J = model.dim();
  auto& th = res.thresholds;
  th.g.assign(model.n_x, std::vector<std::vector<double>>(model.n_z, std::vector<double>(J, 0.0)));
  auto clamp01 = [](double v) { return std::clamp(v, 0.0, 1.0); };

  for (std::size_t x = 0; x < model.n_x; ++x) {
    const auto& dist = dists[x];
    auto C = [&](double u, double v) { return copula_cdf(dist, u, v); };
    switch (model.kind) {
      case ModelKind::Binary:
        for (std::size_t z = 0; z < model.n_z; ++z) th.g[x][z][0] = clamp01(p[x][z][1]);
        break;
      case ModelKind::Sequential:
        for (std::size_t z = 0; z < model.n_z; ++z) {
          const double g1 = clamp01(1.0 - p[x][z][0]);
          th.g[x][z][0] = g1;
          th.g[x][z][1] = detail::bisect_increasing([&](double v) { return C(g1, v); }, g1 - p[x][z][1], 0.0,
                                                    1.0, opt.arg_tol);
        }
        break;
      case ModelKind::DoubleHurdle: {
        std::vector<double> g1(model.n_z1, 0.0), g2(model.n_z2, 0.0);
        g1[model.anchor_z1] = model.anchor;
        for (std::size_t z2 = 0; z2 < model.n_z2; ++z2) {
          const double target = p[x][model.z_of(model.anchor_z1, z2)][1];
          g2[z2] = detail::bisect_increasing([&](double v) { return C(model.anchor, v); }, target, 0.0, 1.0,
                                             opt.arg_tol);
        }
        // Chain through the z2 with the largest g_2: it has the steepest
        // response in g_1.
        const std::size_t z2p = static_cast<std::size_t>(std::max_element(g2.begin(), g2.end()) - g2.begin());
        for (std::size_t z1 = 0; z1 < model.n_z1; ++z1) {
          if (z1 == model.anchor_z1) continue;
          const double target = p[x][model.z_of(z1, z2p)][1];
          g1[z1] = detail::bisect_increasing([&](double u) { return C(u, g2[z2p]); }, target, 0.0, 1.0,
                                             opt.arg_tol);
        }
        for (std::size_t z = 0; z < model.n_z; ++z) {
          th.g[x][z][0] = g1[model.z1_of(z)];
          th.g[x][z][1] = g2[model.z2_of(z)];
        }
        break;
      }
      case ModelKind::Multinomial: {
        const auto& ml = std::get<MultinomialLatent>(dist);
        if (th.tilde.size() != model.n_x) th.tilde.assign(model.n_x, std::vector<std::array<double, 2>>(model.n_z));
        for (std::size_t z = 0; z < model.n_z; ++z) {
          const auto& pz = p[x][z];
          for (std::size_t d = 0; d < 3; ++d) {
            if (!(pz[d] > 0.0 && pz[d] < 1.0)) {
              res.status = IdentifyStatus::Rejected;
              res.d = d;
              res.z = z;
              res.x = x;
              res.max_residual = std::numeric_limits<double>::infinity();
              res.message = "choice probability on the boundary of [0,1]; the latent thresholds are not finite";
              return res;
            }
          }
          std::array<double, 2> t{};
          if (!detail::solve_multinomial(ml, pz[0], pz[1], t, opt.newton_max_iter)) {
            res.status = IdentifyStatus::NumericalFailure;
            res.z = z;
            res.x = x;
            res.message = "latent threshold solver did not converge";
            return res;
          }
          th.tilde[x][z] = t;
          auto g = multinomial_normalized(ml, t[0], t[1]);
          th.g[x][z].assign(g.begin(), g.end());
        }
        break;
      }
    }
  }

  // Forward check on every moment.
  ChoiceProbs fwd;
  try {
    fwd = forward_choice_probs(model, th, dists, opt.quad);
  } catch (const QuadratureError& e) {
    res.status = IdentifyStatus::NumericalFailure;
    res.message = e.what();
    return res;
  }
  for (std::size_t x = 0; x < model.n_x; ++x) {
    for (std::size_t z = 0; z < model.n_z; ++z) {
      for (std::size_t d = 0; d < model.n_d(); ++d) {
        const double r = std::abs(fwd[x][z][d] - p[x][z][d]);
        if (r > res.max_residual) {
          res.max_residual = r;
          res.d = d;
          res.z = z;
          res.x = x;
        }
      }
    }
  }
  if (res.max_residual > opt.eps_feas) {
    res.status = IdentifyStatus::Rejected;
    std::ostringstream os;
    os << "implied choice probability differs from the data by " << res.max_residual << " at d=" << res.d
       << ", z=" << res.z << ", x=" << res.x;
    res.message = os.str();
  }
  return res;
}

}  // namespace mtebounds
