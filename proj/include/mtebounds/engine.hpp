#pragma once

// Per-point bounds (identify thresholds, partition, compile, solve) and the
// sweep over dependence parameters whose union is the identified set.

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstddef>
#include <exception>
#include <limits>
#include <mutex>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "mtebounds/distributions.hpp"
#include "mtebounds/geometry.hpp"
#include "mtebounds/lp.hpp"
#include "mtebounds/moments.hpp"
#include "mtebounds/mtr_space.hpp"
#include "mtebounds/selection.hpp"
#include "mtebounds/targets.hpp"

namespace mtebounds {

enum class Family { Independence, Gaussian, GaussianMixture, MultinomialProbit, MultinomialProbitMixture };

inline const char* to_string(Family f) {
  switch (f) {
    case Family::Independence: return "independence";
    case Family::Gaussian: return "gaussian";
    case Family::GaussianMixture: return "gaussian_mixture";
    case Family::MultinomialProbit: return "multinomial_probit";
    case Family::MultinomialProbitMixture: return "multinomial_probit_mixture";
  }
  return "?";
}

/// One dependence-parameter value. Single-parameter families use rhos[0];
/// mixtures use weights and rhos; independence uses neither.
struct LambdaPoint {
  std::vector<double> weights;
  std::vector<double> rhos;

  friend bool operator==(const LambdaPoint&, const LambdaPoint&) = default;
};

inline UDistribution make_distribution(Family f, const LambdaPoint& l, std::size_t dim) {
  switch (f) {
    case Family::Independence: return make_independence(dim);
    case Family::Gaussian:
      if (l.rhos.size() != 1) throw DistributionError("gaussian copula: lambda needs exactly one rho");
      return make_gaussian_copula(l.rhos[0]);
    case Family::GaussianMixture: return make_gaussian_mixture_copula(l.weights, l.rhos);
    case Family::MultinomialProbit:
      if (l.rhos.size() != 1) throw DistributionError("multinomial probit: lambda needs exactly one rho");
      return make_multinomial_probit(l.rhos[0]);
    case Family::MultinomialProbitMixture: return make_multinomial_probit_mixture(l.weights, l.rhos);
  }
  throw DistributionError("unknown distribution family");
}

inline std::size_t family_dimension(Family f, std::size_t model_dim) {
  if (f == Family::MultinomialProbit || f == Family::MultinomialProbitMixture) return 3;
  if (f == Family::Independence) return model_dim;
  return 2;
}

struct BasisConfig {
  BasisMode mode = BasisMode::PiecewiseConstant;
  std::vector<std::size_t> degree;  // Bernstein degree per dimension
  std::size_t grid_points = 11;
  int refine_rounds = 0;
};

struct Tolerances {
  double eps_feas = 1e-8;
  double merge_tol = 1e-9;
  double mass_floor = 1e-10;
  std::size_t max_cells = 1'000'000;
  QuadratureOptions quad{};
  LpTolerances lp{};
};

struct RunConfig {
  SelectionModel model;
  Family family = Family::Independence;
  std::vector<LambdaPoint> lambdas{LambdaPoint{}};
  std::vector<double> anchors;  // double hurdle only
  TargetSpec target;
  ShapeRestrictions restrictions;
  BasisConfig basis;
  Tolerances tol;
  std::size_t workers = 1;

  /// Anchor values swept for this model; a single placeholder otherwise.
  std::vector<double> anchor_grid() const {
    if (model.kind == ModelKind::DoubleHurdle) return anchors.empty() ? std::vector<double>{model.anchor} : anchors;
    return {std::numeric_limits<double>::quiet_NaN()};
  }
};

enum class PointStatus { Rejected, TargetUndefined, Bounded, InfeasibleOutcomeMoments, NumericalFailure };

inline const char* to_string(PointStatus s) {
  switch (s) {
    case PointStatus::Rejected: return "rejected";
    case PointStatus::TargetUndefined: return "target_undefined";
    case PointStatus::Bounded: return "bounded";
    case PointStatus::InfeasibleOutcomeMoments: return "infeasible_outcome_moments";
    case PointStatus::NumericalFailure: return "numerical_failure";
  }
  return "?";
}

struct PointRecord {
  std::size_t index = 0;
  LambdaPoint lambda;
  std::optional<double> anchor;
  PointStatus status = PointStatus::NumericalFailure;
  double lb = std::numeric_limits<double>::quiet_NaN();
  double ub = std::numeric_limits<double>::quiet_NaN();
  std::string message;
  double identification_residual = 0.0;
  std::size_t cells = 0;
  std::size_t variables = 0;
  std::size_t rows = 0;
  std::size_t lp_iterations = 0;
  double lp_residual = 0.0;
  std::vector<std::string> notes;
  std::optional<Thresholds> thresholds;
};

struct Interval1 {
  double lo, hi;
  friend bool operator==(const Interval1&, const Interval1&) = default;
};

/// Sorted union; intervals within merge_tol of each other coalesce.
inline std::vector<Interval1> union_intervals(std::vector<Interval1> in, double merge_tol = 1e-9) {
  std::sort(in.begin(), in.end(), [](const Interval1& a, const Interval1& b) {
    return a.lo < b.lo || (a.lo == b.lo && a.hi < b.hi);
  });
  std::vector<Interval1> out;
  for (const auto& iv : in) {
    if (!out.empty() && iv.lo <= out.back().hi + merge_tol) {
      out.back().hi = std::max(out.back().hi, iv.hi);
    } else {
      out.push_back(iv);
    }
  }
  return out;
}

struct SweepResult {
  std::vector<PointRecord> records;
  std::vector<Interval1> identified_set;
  bool rejected_everywhere = false;
  std::size_t rejected = 0;
  std::size_t bounded = 0;
};

/// Everything needed to solve one point, or the reason it stopped early.
struct PointProblem {
  std::optional<PointStatus> early;
  std::string message;
  std::vector<UDistribution> dists;
  SelectionModel model;
  std::optional<Thresholds> thresholds;
  double identification_residual = 0.0;
  TargetTerms target;
  std::optional<MtrSpace> space;
  /// Objective minimised; theta = constant + lp objective.
  LinearProgram lp;
  /// Index of each primary variable (k, d, x) in lp, or npos when pruned.
  std::vector<std::size_t> var_map;
  std::vector<std::string> notes;
};

/// Builds the program for one dependence parameter (and anchor).
inline PointProblem build_point_lp(const RunConfig& cfg, const MomentTable& mt, const LambdaPoint& lambda,
                                   double anchor = std::numeric_limits<double>::quiet_NaN()) {
  PointProblem pp;
  pp.model = cfg.model;
  if (!std::isnan(anchor)) pp.model.anchor = anchor;
  const SelectionModel& model = pp.model;
  const std::size_t J = model.dim();

  UDistribution dist = make_distribution(cfg.family, lambda, family_dimension(cfg.family, J));
  pp.dists.assign(model.n_x, dist);

  IdentifyOptions iopt;
  iopt.eps_feas = cfg.tol.eps_feas;
  iopt.quad = cfg.tol.quad;
  IdentifyResult id = identify_thresholds(model, pp.dists, mt.p, iopt);
  pp.identification_residual = id.max_residual;
  if (id.status == IdentifyStatus::Rejected) {
    pp.early = PointStatus::Rejected;
    pp.message = id.message;
    return pp;
  }
  if (id.status == IdentifyStatus::NumericalFailure) {
    pp.early = PointStatus::NumericalFailure;
    pp.message = id.message;
    return pp;
  }
  pp.thresholds = id.thresholds;
  const Thresholds& g = *pp.thresholds;

  TargetOptions topt;
  topt.mass_floor = cfg.tol.mass_floor;
  topt.quad = cfg.tol.quad;
  TargetResult tr = compile_target(cfg.target, model, g, pp.dists, mt, topt);
  if (!tr.defined) {
    pp.early = PointStatus::TargetUndefined;
    pp.message = tr.message;
    return pp;
  }
  pp.target = std::move(tr.terms);

  std::vector<std::vector<std::vector<RectUnion>>> regs(model.n_x);
  std::vector<RectUnion> generators;
  for (std::size_t x = 0; x < model.n_x; ++x) {
    for (std::size_t z = 0; z < model.n_z; ++z) {
      regs[x].push_back(regions(model, g, z, x));
      for (const auto& r : regs[x].back()) generators.push_back(r);
    }
  }
  for (const auto& t : pp.target.terms) generators.push_back(t.set);

  try {
    if (cfg.basis.mode == BasisMode::PiecewiseConstant) {
      PartitionOptions popt;
      popt.max_cells = cfg.tol.max_cells;
      Partition part = build_partition(generators, J, popt);
      if (cfg.basis.refine_rounds > 0) part = part.refined(cfg.basis.refine_rounds);
      if (part.size() > cfg.tol.max_cells) throw GeometryError("refined partition exceeds the cell cap");
      pp.space.emplace(std::move(part), pp.dists, model.n_d(), cfg.tol.quad);
    } else {
      std::vector<std::size_t> deg = cfg.basis.degree;
      if (deg.empty()) deg.assign(J, 3);
      if (deg.size() == 1 && J > 1) deg.assign(J, deg[0]);
      pp.space.emplace(BernsteinBasis(deg, cfg.basis.grid_points), pp.dists, model.n_d(), cfg.tol.quad);
    }

    const MtrSpace& space = *pp.space;
    LinearProgram lp;
    space.add_variables(lp, cfg.restrictions);
    DataCompilation dc = compile_data_constraints(space, lp, regs, mt.e, cfg.tol.eps_feas);
    if (dc.infeasible) {
      pp.early = PointStatus::InfeasibleOutcomeMoments;
      pp.message = dc.message;
      return pp;
    }
    ShapeCompilation sc = compile_shape_constraints(space, lp, cfg.restrictions);
    pp.notes = sc.notes;
    for (const auto& t : pp.target.terms) add_objective_term(space, lp, t.x, t.d, t.weight, t.set);
    std::vector<std::size_t> map;
    pp.lp = prune_unreferenced(lp, &map);
    pp.var_map.assign(map.begin(), map.begin() + static_cast<std::ptrdiff_t>(space.num_primary()));
  } catch (const GeometryError& e) {
    pp.early = PointStatus::NumericalFailure;
    pp.message = e.what();
  } catch (const StraddlingCellError& e) {
    pp.early = PointStatus::NumericalFailure;
    pp.message = e.what();
  } catch (const QuadratureError& e) {
    pp.early = PointStatus::NumericalFailure;
    pp.message = e.what();
  }
  return pp;
}

/// Solves min and max of theta at one point.
inline PointRecord run_point(const RunConfig& cfg, const MomentTable& mt, const LambdaPoint& lambda,
                             double anchor = std::numeric_limits<double>::quiet_NaN()) {
  PointRecord rec;
  rec.lambda = lambda;
  if (!std::isnan(anchor)) rec.anchor = anchor;
  PointProblem pp;
  try {
    pp = build_point_lp(cfg, mt, lambda, anchor);
  } catch (const std::exception& e) {
    rec.status = PointStatus::NumericalFailure;
    rec.message = e.what();
    return rec;
  }
  rec.identification_residual = pp.identification_residual;
  rec.thresholds = pp.thresholds;
  rec.notes = pp.notes;
  if (pp.space && pp.space->mode() == BasisMode::PiecewiseConstant) rec.cells = pp.space->partition().size();
  if (pp.early) {
    rec.status = *pp.early;
    rec.message = pp.message;
    return rec;
  }
  rec.variables = pp.lp.num_vars();
  rec.rows = pp.lp.eq.size() + pp.lp.le.size();

  auto side = [&](LinearProgram::Sense sense, double& value) -> std::optional<PointStatus> {
    LinearProgram lp = pp.lp;
    lp.sense = sense;
    LpOutcome o = solve(lp, cfg.tol.lp);
    rec.lp_iterations += o.iterations;
    switch (o.status) {
      case LpStatus::Optimal:
        value = pp.target.constant + o.value;
        rec.lp_residual = std::max(rec.lp_residual, o.max_residual);
        return std::nullopt;
      case LpStatus::Unbounded:
        value = sense == LinearProgram::Sense::Minimize ? -kInf : kInf;
        return std::nullopt;
      case LpStatus::Infeasible:
        rec.message = "no MTR satisfies the outcome moments and shape restrictions";
        return PointStatus::InfeasibleOutcomeMoments;
      default:
        rec.message = std::string("linear program ended with status ") + to_string(o.status);
        return PointStatus::NumericalFailure;
    }
  };

  if (auto st = side(LinearProgram::Sense::Minimize, rec.lb)) {
    rec.status = *st;
    rec.lb = rec.ub = std::numeric_limits<double>::quiet_NaN();
    return rec;
  }
  if (cfg.target.constant_only()) {
    rec.ub = rec.lb;
  } else if (auto st = side(LinearProgram::Sense::Maximize, rec.ub)) {
    rec.status = *st;
    rec.lb = rec.ub = std::numeric_limits<double>::quiet_NaN();
    return rec;
  }
  rec.status = PointStatus::Bounded;
  return rec;
}

/// Runs every (lambda, anchor) point with up to cfg.workers threads. The
/// record order and the result do not depend on scheduling.
inline SweepResult run_sweep(const RunConfig& cfg, const MomentTable& mt) {
  const auto anchors = cfg.anchor_grid();
  const std::size_t total = cfg.lambdas.size() * anchors.size();
  SweepResult res;
  res.records.resize(total);
  std::atomic<std::size_t> next{0};
  auto work = [&] {
    while (true) {
      const std::size_t i = next.fetch_add(1);
      if (i >= total) return;
      const std::size_t li = i / anchors.size();
      const std::size_t ai = i % anchors.size();
      PointRecord rec = run_point(cfg, mt, cfg.lambdas[li], anchors[ai]);
      rec.index = i;
      res.records[i] = std::move(rec);
    }
  };
  const std::size_t workers = std::max<std::size_t>(1, std::min(cfg.workers, total));
  if (workers == 1) {
    work();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(work);
    for (auto& t : pool) t.join();
  }

  std::vector<Interval1> ivs;
  for (const auto& r : res.records) {
    if (r.status == PointStatus::Rejected) ++res.rejected;
    if (r.status == PointStatus::Bounded) {
      ++res.bounded;
      ivs.push_back({r.lb, r.ub});
    }
  }
  res.rejected_everywhere = total > 0 && res.rejected == total;
  res.identified_set = union_intervals(std::move(ivs), cfg.tol.merge_tol);
  return res;
}

}  // namespace mtebounds
