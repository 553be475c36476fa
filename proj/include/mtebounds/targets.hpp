#pragma once

// Target parameters written as weighted integrals of the MTRs:
//   theta = constant + sum over terms of weight * int_{set} m_{d|x} dF_x.

#include <cmath>
#include <cstddef>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "mtebounds/distributions.hpp"
#include "mtebounds/geometry.hpp"
#include "mtebounds/moments.hpp"
#include "mtebounds/selection.hpp"

namespace mtebounds {

enum class TargetKind {
  ATE,
  ATT,
  LATE,
  LATEGroupProb,
  PRTE,
  PRTESubgroupProb,
  PRTEConditional,
  PRTEConditionalProb,
  Custom
};

inline const char* to_string(TargetKind k) {
  switch (k) {
    case TargetKind::ATE: return "ate";
    case TargetKind::ATT: return "att";
    case TargetKind::LATE: return "late";
    case TargetKind::LATEGroupProb: return "late_group_prob";
    case TargetKind::PRTE: return "prte";
    case TargetKind::PRTESubgroupProb: return "prte_subgroup_prob";
    case TargetKind::PRTEConditional: return "prte_conditional";
    case TargetKind::PRTEConditionalProb: return "prte_conditional_prob";
    case TargetKind::Custom: return "custom";
  }
  return "?";
}

/// Selection region U_{d,z|x}(g + shift) used by custom targets. shift
/// indexes TargetSpec::shifts; -1 means unshifted.
struct RegionRef {
  std::size_t d = 0;
  std::size_t z = 0;
  int shift = -1;
};

/// Custom term: weight * int over (intersection of refs, or the full cube)
/// of m_{d|x}.
struct CustomTerm {
  std::size_t x = 0;
  std::size_t d = 0;
  double weight = 0.0;
  std::vector<RegionRef> refs;  // empty: [0,1]^J
};

struct TargetSpec {
  TargetKind kind = TargetKind::ATE;
  std::size_t d1 = 1;  // d'
  std::size_t d0 = 0;  // d''
  /// LATE response pattern: pairs (z, d_z).
  std::vector<std::pair<std::size_t, std::size_t>> response;
  /// PRTE policies delta' = shifts[0], delta'' = shifts[1]; custom targets
  /// may reference any number of shifts.
  std::vector<PolicyShift> shifts;
  std::vector<CustomTerm> custom;
  double custom_constant = 0.0;

  bool constant_only() const {
    return kind == TargetKind::LATEGroupProb || kind == TargetKind::PRTESubgroupProb ||
           kind == TargetKind::PRTEConditionalProb;
  }
};

struct TargetTerm {
  std::size_t x = 0;
  std::size_t d = 0;
  double weight = 0.0;
  RectUnion set;
};

struct TargetTerms {
  std::vector<TargetTerm> terms;
  double constant = 0.0;
  /// Conditioning masses used as denominators, by name.
  std::vector<std::pair<std::string, double>> masses;
};

struct TargetResult {
  bool defined = true;
  TargetTerms terms;
  std::string message;
};

struct TargetOptions {
  double mass_floor = 1e-10;
  QuadratureOptions quad{};
};

/// Rejects references to treatments, instrument points or shifts that do
/// not exist; returns a message or an empty string.
inline std::string check_target(const TargetSpec& t, const SelectionModel& m) {
  const std::size_t nd = m.n_d();
  auto bad_d = [&](std::size_t d) { return d >= nd; };
  switch (t.kind) {
    case TargetKind::ATE:
    case TargetKind::ATT:
      if (bad_d(t.d1) || bad_d(t.d0)) return "target: treatment out of range";
      break;
    case TargetKind::LATE:
    case TargetKind::LATEGroupProb:
      if (t.kind == TargetKind::LATE && (bad_d(t.d1) || bad_d(t.d0))) return "target: treatment out of range";
      if (t.response.empty()) return "target: LATE response pattern is empty";
      for (const auto& [z, d] : t.response) {
        if (z >= m.n_z) return "target: response instrument point out of range";
        if (bad_d(d)) return "target: response treatment out of range";
      }
      break;
    case TargetKind::PRTE:
    case TargetKind::PRTESubgroupProb:
    case TargetKind::PRTEConditional:
    case TargetKind::PRTEConditionalProb:
      if (t.shifts.size() != 2) return "target: policy effects need exactly two shifts";
      if ((t.kind == TargetKind::PRTEConditional || t.kind == TargetKind::PRTEConditionalProb) &&
          (bad_d(t.d1) || bad_d(t.d0))) {
        return "target: treatment out of range";
      }
      break;
    case TargetKind::Custom:
      for (const auto& term : t.custom) {
        if (term.x >= m.n_x) return "target: custom term covariate cell out of range";
        if (bad_d(term.d)) return "target: custom term treatment out of range";
        if (!std::isfinite(term.weight)) return "target: custom term weight is not finite";
        for (const auto& r : term.refs) {
          if (r.z >= m.n_z || bad_d(r.d)) return "target: custom region reference out of range";
          if (r.shift >= static_cast<int>(t.shifts.size()) || r.shift < -1) {
            return "target: custom region references an unknown shift";
          }
        }
      }
      break;
  }
  for (const auto& s : t.shifts) {
    const bool tilde = m.kind == ModelKind::Multinomial;
    if (tilde && s.scale != PolicyShift::Scale::Tilde) {
      return "target: the multinomial model accepts only latent-scale shifts; normalized-scale shifts would "
             "break the deterministic link between the third threshold and the latent pair";
    }
    if (!tilde && s.scale != PolicyShift::Scale::Normalized) return "target: latent-scale shifts need the multinomial model";
  }
  return {};
}

namespace detail {

inline RectUnion intersect_all(const std::vector<RectUnion>& sets, std::size_t dim) {
  RectUnion out = RectUnion::full(dim);
  for (const auto& s : sets) out = intersect(out, s);
  return out;
}

}  // namespace detail

/// Compiles the target at thresholds g. Weights use P(X=x), P(X=x,Z=z) and
/// P(D=d) from the moment table. Denominators below the mass floor, and
/// shifts leaving [0,1], make the target undefined.
inline TargetResult compile_target(const TargetSpec& spec, const SelectionModel& model, const Thresholds& g,
                                   const std::vector<UDistribution>& dists, const MomentTable& mt,
                                   const TargetOptions& opt = {}) {
  TargetResult res;
  if (auto msg = check_target(spec, model); !msg.empty()) {
    res.defined = false;
    res.message = msg;
    return res;
  }
  const std::size_t J = model.dim();
  const std::size_t nx = model.n_x, nz = model.n_z, nd = model.n_d();
  auto& out = res.terms;
  auto undefined = [&](const std::string& what, double mass) {
    res.defined = false;
    std::ostringstream os;
    os << what << " has mass " << mass << ", below the floor " << opt.mass_floor;
    res.message = os.str();
    return res;
  };
  auto mu = [&](std::size_t x, const RectUnion& s) { return measure(dists[x], s, opt.quad); };

  // Shifted thresholds for the policy kinds.
  std::vector<Thresholds> shifted;
  try {
    for (const auto& s : spec.shifts) shifted.push_back(shift(model, g, s, dists));
  } catch (const ShiftError& e) {
    res.defined = false;
    res.message = std::string("invalid policy shift: ") + e.what();
    return res;
  }
  auto regions_at = [&](const Thresholds& th, std::size_t z, std::size_t x) { return regions(model, th, z, x); };

  switch (spec.kind) {
    case TargetKind::ATE:
      for (std::size_t x = 0; x < nx; ++x) {
        out.terms.push_back({x, spec.d1, mt.px(x), RectUnion::full(J)});
        out.terms.push_back({x, spec.d0, -mt.px(x), RectUnion::full(J)});
      }
      break;

    case TargetKind::ATT: {
      const double den = mt.pd(spec.d1);
      out.masses.emplace_back("P(D=d')", den);
      if (den < opt.mass_floor) return undefined("treated group P(D=d')", den);
      for (std::size_t x = 0; x < nx; ++x) {
        for (std::size_t z = 0; z < nz; ++z) {
          const RectUnion set = regions_at(g, z, x)[spec.d1];
          const double w = mt.pxz(x, z) / den;
          out.terms.push_back({x, spec.d1, w, set});
          out.terms.push_back({x, spec.d0, -w, set});
        }
      }
      break;
    }

    case TargetKind::LATE:
    case TargetKind::LATEGroupProb: {
      std::vector<RectUnion> sets;
      double mass = 0.0;
      for (std::size_t x = 0; x < nx; ++x) {
        std::vector<RectUnion> parts;
        for (const auto& [z, dz] : spec.response) parts.push_back(regions_at(g, z, x)[dz]);
        sets.push_back(detail::intersect_all(parts, J));
        mass += mt.px(x) * mu(x, sets.back());
      }
      out.masses.emplace_back("response group", mass);
      if (spec.kind == TargetKind::LATEGroupProb) {
        out.constant = mass;
        break;
      }
      if (mass < opt.mass_floor) return undefined("response group", mass);
      for (std::size_t x = 0; x < nx; ++x) {
        out.terms.push_back({x, spec.d1, mt.px(x) / mass, sets[x]});
        out.terms.push_back({x, spec.d0, -mt.px(x) / mass, sets[x]});
      }
      break;
    }

    case TargetKind::PRTE:
    case TargetKind::PRTESubgroupProb: {
      // Stayers: same treatment under both policies.
      double stay = 0.0, movers = 0.0;
      for (std::size_t x = 0; x < nx; ++x) {
        for (std::size_t z = 0; z < nz; ++z) {
          auto a = regions_at(shifted[0], z, x);
          auto b = regions_at(shifted[1], z, x);
          RectUnion same(J);
          for (std::size_t d = 0; d < nd; ++d) {
            const RectUnion both = intersect(a[d], b[d]);
            for (const auto& r : both.rects()) same.add(r);
          }
          stay += mt.pxz(x, z) * mu(x, same);
          movers += mt.pxz(x, z) * mu(x, complement(same));
        }
      }
      out.masses.emplace_back("policy movers", movers);
      if (spec.kind == TargetKind::PRTESubgroupProb) {
        out.constant = movers;
        break;
      }
      const double den = 1.0 - stay;
      if (den < opt.mass_floor) return undefined("policy movers", den);
      for (std::size_t x = 0; x < nx; ++x) {
        for (std::size_t z = 0; z < nz; ++z) {
          auto a = regions_at(shifted[0], z, x);
          auto b = regions_at(shifted[1], z, x);
          const double w = mt.pxz(x, z) / den;
          for (std::size_t d = 0; d < nd; ++d) {
            out.terms.push_back({x, d, w, a[d]});
            out.terms.push_back({x, d, -w, b[d]});
          }
        }
      }
      break;
    }

    case TargetKind::PRTEConditional:
    case TargetKind::PRTEConditionalProb: {
      std::vector<std::vector<RectUnion>> sets(nx);
      double mass = 0.0;
      for (std::size_t x = 0; x < nx; ++x) {
        for (std::size_t z = 0; z < nz; ++z) {
          sets[x].push_back(intersect(regions_at(shifted[0], z, x)[spec.d1], regions_at(shifted[1], z, x)[spec.d0]));
          mass += mt.pxz(x, z) * mu(x, sets[x].back());
        }
      }
      out.masses.emplace_back("policy response group", mass);
      if (spec.kind == TargetKind::PRTEConditionalProb) {
        out.constant = mass;
        break;
      }
      if (mass < opt.mass_floor) return undefined("policy response group", mass);
      for (std::size_t x = 0; x < nx; ++x) {
        for (std::size_t z = 0; z < nz; ++z) {
          const double w = mt.pxz(x, z) / mass;
          out.terms.push_back({x, spec.d1, w, sets[x][z]});
          out.terms.push_back({x, spec.d0, -w, sets[x][z]});
        }
      }
      break;
    }

    case TargetKind::Custom:
      out.constant = spec.custom_constant;
      for (const auto& term : spec.custom) {
        std::vector<RectUnion> parts;
        for (const auto& r : term.refs) {
          const Thresholds& th = r.shift < 0 ? g : shifted[static_cast<std::size_t>(r.shift)];
          parts.push_back(regions_at(th, r.z, term.x)[r.d]);
        }
        out.terms.push_back({term.x, term.d, term.weight, detail::intersect_all(parts, J)});
      }
      break;
  }
  return res;
}

/// theta evaluated at known MTRs: f(x, d, u) returns m_{d|x}(u). Used to
/// compute true target values in tests.
template <class F>
double evaluate_target(const TargetTerms& t, const std::vector<UDistribution>& dists, F&& m,
                       const QuadratureOptions& q = {}) {
  double v = t.constant;
  for (const auto& term : t.terms) {
    if (term.weight == 0.0) continue;
    PointFunction f = [&](std::span<const double> u, std::span<double> o) { o[0] = m(term.x, term.d, u); };
    for (const auto& r : term.set.rects()) v += term.weight * rect_expectation(dists[term.x], r, f, 1, q)[0];
  }
  return v;
}

}  // namespace mtebounds
