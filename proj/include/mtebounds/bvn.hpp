#pragma once

// Bivariate standard normal distribution function.
//
// Drezner-Wesolowsky integration as refined by Genz (2004), "Numerical
// computation of rectangular bivariate and trivariate normal and t
// probabilities": Gauss-Legendre rules of 6/12/20 points depending on |rho|,
// with the asymptotic expansion of the integrand for |rho| >= 0.925.
// Absolute accuracy is close to machine precision.

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>

#include "mtebounds/normal.hpp"

namespace mtebounds {

namespace detail {

struct GaussLegendreHalf {
  const double* w;
  const double* x;
  int n;
};

inline GaussLegendreHalf bvn_rule(double abs_r) {
  static constexpr double w6[] = {0.1713244923791705, 0.3607615730481384, 0.4679139345726904};
  static constexpr double x6[] = {0.9324695142031522, 0.6612093864662647, 0.2386191860831970};
  static constexpr double w12[] = {0.04717533638651177, 0.1069393259953183, 0.1600783285433464,
                                   0.2031674267230659,  0.2334925365383547, 0.2491470458134029};
  static constexpr double x12[] = {0.9815606342467191, 0.9041172563704750, 0.7699026741943050,
                                   0.5873179542866171, 0.3678314989981802, 0.1252334085114692};
  static constexpr double w20[] = {0.01761400713915212, 0.04060142980038694, 0.06267204833410906,
                                   0.08327674157670475, 0.1019301198172404,  0.1181945319615184,
                                   0.1316886384491766,  0.1420961093183821,  0.1491729864726037,
                                   0.1527533871307259};
  static constexpr double x20[] = {0.9931285991850949, 0.9639719272779138, 0.9122344282513259,
                                   0.8391169718222188, 0.7463319064601508, 0.6360536807265150,
                                   0.5108670019508271, 0.3737060887154196, 0.2277858511416451,
                                   0.07652652113349733};
  if (abs_r < 0.3) return {w6, x6, 3};
  if (abs_r < 0.75) return {w12, x12, 6};
  return {w20, x20, 10};
}

/// P(X > dh, Y > dk) for a standard bivariate normal with correlation r.
inline double bvn_upper(double dh, double dk, double r) {
  if (dh == kInf || dk == kInf) return 0.0;
  if (dh == -kInf) return dk == -kInf ? 1.0 : normal_cdf(-dk);
  if (dk == -kInf) return normal_cdf(-dh);
  if (r == 0.0) return normal_cdf(-dh) * normal_cdf(-dk);

  constexpr double two_pi = 2.0 * std::numbers::pi;
  double h = dh;
  double k = dk;
  double hk = h * k;
  double bvn = 0.0;
  const auto rule = bvn_rule(std::abs(r));

  if (std::abs(r) < 0.925) {
    const double hs = 0.5 * (h * h + k * k);
    const double asr = 0.5 * std::asin(r);
    for (int i = 0; i < rule.n; ++i) {
      for (double sign : {-1.0, 1.0}) {
        const double sn = std::sin(asr * (1.0 + sign * rule.x[i]));
        bvn += rule.w[i] * std::exp((sn * hk - hs) / (1.0 - sn * sn));
      }
    }
    bvn = bvn * asr / two_pi + normal_cdf(-h) * normal_cdf(-k);
  } else {
    if (r < 0.0) {
      k = -k;
      hk = -hk;
    }
    if (std::abs(r) < 1.0) {
      const double as = (1.0 - r) * (1.0 + r);
      double a = std::sqrt(as);
      const double bs = (h - k) * (h - k);
      const double c = (4.0 - hk) / 8.0;
      const double d = (12.0 - hk) / 80.0;
      double asr = -0.5 * (bs / as + hk);
      if (asr > -100.0) {
        bvn = a * std::exp(asr) * (1.0 - c * (bs - as) * (1.0 - d * bs) / 3.0 + c * d * as * as);
      }
      if (hk > -100.0) {
        const double b = std::sqrt(bs);
        const double sp = std::sqrt(two_pi) * normal_cdf(-b / a);
        bvn -= std::exp(-0.5 * hk) * sp * b * (1.0 - c * bs * (1.0 - d * bs) / 3.0);
      }
      a *= 0.5;
      double sum = 0.0;
      for (int i = 0; i < rule.n; ++i) {
        for (double sign : {-1.0, 1.0}) {
          const double xi = a * (1.0 + sign * rule.x[i]);
          const double xs = xi * xi;
          const double asr_i = -0.5 * (bs / xs + hk);
          if (asr_i > -100.0) {
            const double sp = 1.0 + c * xs * (1.0 + 5.0 * d * xs);
            const double rs = std::sqrt(1.0 - xs);
            const double ep = std::exp(-0.5 * hk * xs / ((1.0 + rs) * (1.0 + rs))) / rs;
            sum += rule.w[i] * std::exp(asr_i) * (sp - ep);
          }
        }
      }
      bvn = (a * sum - bvn) / two_pi;
    }
    if (r > 0.0) {
      bvn += normal_cdf(-std::max(h, k));
    } else if (h >= k) {
      bvn = -bvn;
    } else {
      const double l = h < 0.0 ? normal_cdf(k) - normal_cdf(h) : normal_cdf(-h) - normal_cdf(-k);
      bvn = l - bvn;
    }
  }
  return std::clamp(bvn, 0.0, 1.0);
}

}  // namespace detail

/// P(X <= a, Y <= b) for a standard bivariate normal with correlation rho.
/// Accepts +-infinity for either limit; rho must lie in [-1, 1].
inline double bvn_cdf(double a, double b, double rho) {
  if (a == -kInf || b == -kInf) return 0.0;
  if (a == kInf) return normal_cdf(b);
  if (b == kInf) return normal_cdf(a);
  return detail::bvn_upper(-a, -b, rho);
}

}  // namespace mtebounds
