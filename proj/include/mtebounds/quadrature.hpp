#pragma once

// Globally adaptive Gauss-Kronrod (7/15) integration of vector-valued
// integrands on finite intervals.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <queue>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace mtebounds {

struct QuadratureOptions {
  double abs_tol = 1e-10;
  double rel_tol = 0.0;
  std::size_t max_panels = 2000;
};

class QuadratureError : public std::runtime_error {
 public:
  QuadratureError(const std::string& what, double achieved_error)
      : std::runtime_error(what + " (achieved error estimate " + std::to_string(achieved_error) + ")"),
        achieved_error_(achieved_error) {}
  double achieved_error() const noexcept { return achieved_error_; }

 private:
  double achieved_error_;
};

struct QuadratureResult {
  std::vector<double> value;
  double error = 0.0;
  std::size_t panels = 0;
};

namespace detail {

inline constexpr double kGkNodes[8] = {
    0.991455371120812639206854697526329, 0.949107912342758524526189684047851,
    0.864864423359769072789712788640926, 0.741531185599394439863864773280788,
    0.586087235467691130294144845693013, 0.405845151377397166906606412076961,
    0.207784955007898467600689403773245, 0.000000000000000000000000000000000};
inline constexpr double kKronrodWeights[8] = {
    0.022935322010529224963732008058970, 0.063092092629978553290700663189204,
    0.104790010322250183839876322541518, 0.140653259715525918745189590510238,
    0.169004726639267902826583426598550, 0.190350578064785409913256402421014,
    0.204432940075298892414161999234649, 0.209482141084727828012999174891714};
// Gauss weights for the nodes kGkNodes[1], [3], [5], [7].
inline constexpr double kGaussWeights[4] = {
    0.129484966168869693270611432679082, 0.279705391489276667901467771423780,
    0.381830050505118944950369775488975, 0.417959183673469387755102040816327};

struct Panel {
  double a, b;
  std::vector<double> value;
  double error;
  bool operator<(const Panel& o) const { return error < o.error; }
};

template <class F>
Panel gk15(F& f, double a, double b, std::size_t n_out, std::vector<double>& buf) {
  const double c = 0.5 * (a + b);
  const double h = 0.5 * (b - a);
  Panel p{a, b, std::vector<double>(n_out, 0.0), 0.0};
  std::vector<double> gauss(n_out, 0.0);
  for (int i = 0; i < 8; ++i) {
    const double dx = h * kGkNodes[i];
    const int reps = (i == 7) ? 1 : 2;
    for (int s = 0; s < reps; ++s) {
      const double x = (s == 0) ? c - dx : c + dx;
      std::fill(buf.begin(), buf.end(), 0.0);
      f(x, std::span<double>(buf));
      for (std::size_t k = 0; k < n_out; ++k) {
        p.value[k] += kKronrodWeights[i] * buf[k];
        if (i % 2 == 1) gauss[k] += kGaussWeights[i / 2] * buf[k];
      }
    }
  }
  for (std::size_t k = 0; k < n_out; ++k) {
    p.value[k] *= h;
    gauss[k] *= h;
    p.error = std::max(p.error, std::abs(p.value[k] - gauss[k]));
  }
  return p;
}

}  // namespace detail

/// Integrates f over [a, b], where f(x, out) writes n_out values into out.
/// Throws QuadratureError if the error target is not met within the panel
/// budget.
template <class F>
QuadratureResult integrate_vector(F&& f, double a, double b, std::size_t n_out,
                                  const QuadratureOptions& opt = {}) {
  QuadratureResult result;
  result.value.assign(n_out, 0.0);
  if (!(b > a) || n_out == 0) return result;

  std::vector<double> buf(n_out);
  std::priority_queue<detail::Panel> heap;
  heap.push(detail::gk15(f, a, b, n_out, buf));
  result.panels = 1;

  auto totals = [&](std::vector<double>& value, double& err) {
    auto copy = heap;
    value.assign(n_out, 0.0);
    err = 0.0;
    while (!copy.empty()) {
      const auto& p = copy.top();
      for (std::size_t k = 0; k < n_out; ++k) value[k] += p.value[k];
      err += p.error;
      copy.pop();
    }
  };

  double total_err = heap.top().error;
  while (true) {
    double scale = 0.0;
    if (opt.rel_tol > 0.0) {
      std::vector<double> v;
      double e;
      totals(v, e);
      for (double x : v) scale = std::max(scale, std::abs(x));
    }
    if (total_err <= std::max(opt.abs_tol, opt.rel_tol * scale)) break;
    if (result.panels >= opt.max_panels) {
      throw QuadratureError("adaptive quadrature did not converge within " +
                                std::to_string(opt.max_panels) + " panels",
                            total_err);
    }
    detail::Panel worst = heap.top();
    heap.pop();
    const double mid = 0.5 * (worst.a + worst.b);
    if (!(mid > worst.a && mid < worst.b)) {
      throw QuadratureError("adaptive quadrature panel collapsed to machine precision", total_err);
    }
    auto left = detail::gk15(f, worst.a, mid, n_out, buf);
    auto right = detail::gk15(f, mid, worst.b, n_out, buf);
    total_err += left.error + right.error - worst.error;
    heap.push(std::move(left));
    heap.push(std::move(right));
    ++result.panels;
    // Running error sums drift; resynchronise occasionally.
    if (result.panels % 64 == 0) {
      std::vector<double> v;
      totals(v, total_err);
    }
  }
  totals(result.value, result.error);
  return result;
}

/// Integrates over consecutive sub-intervals split at the given interior
/// points; useful when the integrand has known kinks.
template <class F>
QuadratureResult integrate_vector_split(F&& f, double a, double b, std::vector<double> splits,
                                        std::size_t n_out, const QuadratureOptions& opt = {}) {
  QuadratureResult total;
  total.value.assign(n_out, 0.0);
  if (!(b > a)) return total;
  std::vector<double> pts{a};
  std::sort(splits.begin(), splits.end());
  for (double s : splits) {
    if (std::isfinite(s) && s > pts.back() && s < b) pts.push_back(s);
  }
  pts.push_back(b);
  const std::size_t pieces = pts.size() - 1;
  QuadratureOptions sub = opt;
  sub.abs_tol = opt.abs_tol / static_cast<double>(pieces);
  for (std::size_t i = 0; i + 1 < pts.size(); ++i) {
    auto r = integrate_vector(f, pts[i], pts[i + 1], n_out, sub);
    for (std::size_t k = 0; k < n_out; ++k) total.value[k] += r.value[k];
    total.error += r.error;
    total.panels += r.panels;
  }
  return total;
}

template <class F>
double integrate(F&& f, double a, double b, const QuadratureOptions& opt = {}) {
  auto vf = [&f](double x, std::span<double> out) { out[0] = f(x); };
  return integrate_vector(vf, a, b, 1, opt).value[0];
}

template <class F>
double integrate_split(F&& f, double a, double b, std::vector<double> splits,
                       const QuadratureOptions& opt = {}) {
  auto vf = [&f](double x, std::span<double> out) { out[0] = f(x); };
  return integrate_vector_split(vf, a, b, std::move(splits), 1, opt).value[0];
}

}  // namespace mtebounds
