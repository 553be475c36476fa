#pragma once

// Observed moments: choice probabilities P_{d|z,x}, outcome moments
// E_{d|z,x} = E[Y 1{D=d} | Z=z, X=x] and cell weights P(X=x, Z=z).

#include <cmath>
#include <cstddef>
#include <sstream>
#include <string>
#include <vector>

#include "mtebounds/selection.hpp"

namespace mtebounds {

struct MomentTable {
  std::size_t n_d = 2;
  std::size_t n_z = 1;
  std::size_t n_x = 1;
  /// Optional factorization z = z1 * n_z2 + z2; zero when absent.
  std::size_t n_z1 = 0;
  std::size_t n_z2 = 0;
  std::vector<std::string> d_labels, z_labels, x_labels;
  std::vector<std::vector<std::vector<double>>> p;  // [x][z][d]
  std::vector<std::vector<std::vector<double>>> e;  // [x][z][d]
  std::vector<std::vector<double>> w;               // P(X=x, Z=z), [x][z]

  static MomentTable zeros(std::size_t n_d, std::size_t n_z, std::size_t n_x) {
    MomentTable t;
    t.n_d = n_d;
    t.n_z = n_z;
    t.n_x = n_x;
    t.p.assign(n_x, std::vector<std::vector<double>>(n_z, std::vector<double>(n_d, 0.0)));
    t.e = t.p;
    t.w.assign(n_x, std::vector<double>(n_z, 1.0 / static_cast<double>(n_x * n_z)));
    t.default_labels();
    return t;
  }

  void default_labels() {
    auto fill = [](std::vector<std::string>& v, std::size_t n) {
      if (v.size() == n) return;
      v.clear();
      for (std::size_t i = 0; i < n; ++i) v.push_back(std::to_string(i));
    };
    fill(d_labels, n_d);
    fill(z_labels, n_z);
    fill(x_labels, n_x);
  }

  double px(std::size_t x) const {
    double s = 0.0;
    for (double v : w[x]) s += v;
    return s;
  }

  double pxz(std::size_t x, std::size_t z) const { return w[x][z]; }

  double pd(std::size_t d) const {
    double s = 0.0;
    for (std::size_t x = 0; x < n_x; ++x) {
      for (std::size_t z = 0; z < n_z; ++z) s += w[x][z] * p[x][z][d];
    }
    return s;
  }

  /// Invariant violations as human-readable messages; empty when valid.
  std::vector<std::string> problems(double tol = 1e-9) const {
    std::vector<std::string> out;
    auto shape_ok = [&](const auto& a) {
      if (a.size() != n_x) return false;
      for (const auto& ax : a) {
        if (ax.size() != n_z) return false;
        for (const auto& az : ax) {
          if (az.size() != n_d) return false;
        }
      }
      return true;
    };
    if (n_d == 0 || n_z == 0 || n_x == 0) {
      out.push_back("moment table: supports must be nonempty");
      return out;
    }
    if (!shape_ok(p)) out.push_back("moment table: choice probabilities do not match the declared supports");
    if (!shape_ok(e)) out.push_back("moment table: outcome moments do not match the declared supports");
    bool w_ok = w.size() == n_x;
    for (const auto& wx : w) w_ok = w_ok && wx.size() == n_z;
    if (!w_ok) out.push_back("moment table: cell weights do not match the declared supports");
    if (!out.empty()) return out;
    if (n_z1 || n_z2) {
      if (n_z1 * n_z2 != n_z) out.push_back("moment table: instrument factorization does not multiply to n_z");
    }

    double total = 0.0;
    for (std::size_t x = 0; x < n_x; ++x) {
      for (std::size_t z = 0; z < n_z; ++z) {
        std::ostringstream cell;
        cell << "(z=" << z << ", x=" << x << ")";
        if (!(w[x][z] >= 0.0 && w[x][z] <= 1.0)) out.push_back("cell weight outside [0,1] at " + cell.str());
        total += w[x][z];
        double s = 0.0;
        for (std::size_t d = 0; d < n_d; ++d) {
          const double v = p[x][z][d];
          if (!(v >= 0.0 && v <= 1.0)) {
            out.push_back("P(D=" + std::to_string(d) + "|z,x) outside [0,1] at " + cell.str());
          }
          if (!std::isfinite(e[x][z][d])) {
            out.push_back("E[Y 1{D=" + std::to_string(d) + "}|z,x] is not finite at " + cell.str());
          }
          s += v;
        }
        if (std::abs(s - 1.0) > tol) {
          std::ostringstream os;
          os << "choice probabilities sum to " << s << " at " << cell.str();
          out.push_back(os.str());
        }
      }
    }
    if (std::abs(total - 1.0) > tol) {
      std::ostringstream os;
      os << "cell weights P(X=x,Z=z) sum to " << total;
      out.push_back(os.str());
    }
    return out;
  }

  ChoiceProbs choice_probs() const { return p; }
};

}  // namespace mtebounds
