// Acceptance checks. Prints one PASS/FAIL line per criterion and exits
// nonzero if any fails. Usage: acceptance <cli-binary> <samples-dir>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <numbers>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "dgp.hpp"
#include "mtebounds/mtebounds.hpp"

using namespace mtebounds;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = true;
  std::string detail;
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

Rect R(std::vector<Interval> s) { return Rect(std::move(s)); }

Interval random_interval(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> U(0.0, 1.0);
  double a = U(rng), b = U(rng);
  if (a > b) std::swap(a, b);
  return {a, b};
}

// --- 1. Manski bounds --------------------------------------------------------

Outcome manski() {
  std::mt19937_64 rng(101);
  std::uniform_real_distribution<double> U(0.0, 1.0);
  RunConfig cfg;
  cfg.restrictions.bounds = std::pair{0.0, 1.0};
  double worst = 0.0;
  int ok = 0;
  for (int i = 0; i < 50; ++i) {
    const double p = 0.05 + 0.9 * U(rng);
    const double e1 = p * U(rng), e0 = (1 - p) * U(rng);
    auto mt = MomentTable::zeros(2, 1, 1);
    mt.p[0][0] = {1 - p, p};
    mt.e[0][0] = {e0, e1};
    const auto r = run_point(cfg, mt, {});
    const double lb = e1 - e0 - p, ub = e1 + (1 - p) - e0;
    if (r.status != PointStatus::Bounded) continue;
    const double err = std::max(std::abs(r.lb - lb), std::abs(r.ub - ub));
    worst = std::max(worst, err);
    ok += err <= 1e-8;
  }
  return {ok == 50, fmt("%d/50 tables within 1e-8, max error %.2e", ok, worst)};
}

// --- 2. Wald / LATE -------------------------------------------------------------

Outcome wald() {
  std::mt19937_64 rng(202);
  double worst = 0.0;
  int ok = 0;
  for (int i = 0; i < 50; ++i) {
    synth::Dgp g;
    g.model = SelectionModel{.n_z = 2};
    g.dists = {make_independence(1)};
    g.th = synth::random_thresholds(g.model, rng, 0.1, 0.9);
    if (std::abs(g.th.g[0][0][0] - g.th.g[0][1][0]) < 0.05) g.th.g[0][1][0] = g.th.g[0][0][0] > 0.5 ? 0.05 : 0.95;
    g.m = synth::random_linear_mtr(1, 2, 1, rng);
    const auto mt = synth::population_moments(g);
    const std::size_t lo = g.th.g[0][0][0] < g.th.g[0][1][0] ? 0 : 1, hi = 1 - lo;
    RunConfig cfg;
    cfg.model = g.model;
    cfg.restrictions.bounds = std::pair{0.0, 1.0};
    cfg.target.kind = TargetKind::LATE;
    cfg.target.response = {{lo, 0}, {hi, 1}};
    const auto r = run_point(cfg, mt, {});
    const auto& e = mt.e[0];
    const double w = (e[hi][0] + e[hi][1] - e[lo][0] - e[lo][1]) / (mt.p[0][hi][1] - mt.p[0][lo][1]);
    if (r.status != PointStatus::Bounded) continue;
    const double err = std::max(std::abs(r.lb - w), std::abs(r.ub - w));
    worst = std::max(worst, err);
    ok += err <= 1e-6;
  }
  return {ok == 50, fmt("%d/50 tables with lb = ub = Wald within 1e-6, max error %.2e", ok, worst)};
}

// --- 3. Threshold round trip -------------------------------------------------

Outcome round_trip() {
  std::mt19937_64 rng(303);
  const std::vector<double> rhos{-0.8, -0.6, -0.4, -0.2, 0.0, 0.2, 0.4, 0.6, 0.8};
  int ok[3] = {0, 0, 0};
  double worst_g = 0.0, worst_t = 0.0;
  for (int model = 0; model < 3; ++model) {
    for (int i = 0; i < 200; ++i) {
      SelectionModel m;
      UDistribution dist;
      const bool indep = i % 10 == 9;
      const double rho = rhos[static_cast<std::size_t>(i) % rhos.size()];
      Thresholds th;
      if (model == 0) {
        m = SelectionModel{.kind = ModelKind::Sequential, .n_z = 3};
        dist = indep ? make_independence(2) : make_gaussian_copula(rho);
        th = synth::random_thresholds(m, rng, 0.05, 0.95);
      } else if (model == 1) {
        std::uniform_real_distribution<double> A(0.2, 0.8);
        m = SelectionModel{.kind = ModelKind::DoubleHurdle, .n_z = 6, .n_z1 = 2, .n_z2 = 3, .anchor = A(rng)};
        dist = indep ? make_independence(2) : make_gaussian_copula(rho);
        th = synth::random_double_hurdle_thresholds(m, rng);
      } else {
        m = SelectionModel{.kind = ModelKind::Multinomial, .n_z = 2};
        dist = make_multinomial_probit(rho);
        th = synth::random_multinomial_thresholds(m, std::get<MultinomialLatent>(dist), rng);
      }
      const std::vector<UDistribution> d{dist};
      const auto r = identify_thresholds(m, d, forward_choice_probs(m, th, d));
      if (!r.ok()) continue;
      double eg = 0.0, et = 0.0;
      for (std::size_t z = 0; z < m.n_z; ++z) {
        for (std::size_t j = 0; j < m.dim(); ++j) eg = std::max(eg, std::abs(r.thresholds.g[0][z][j] - th.g[0][z][j]));
        if (model == 2) {
          for (std::size_t j = 0; j < 2; ++j) et = std::max(et, std::abs(r.thresholds.tilde[0][z][j] - th.tilde[0][z][j]));
        }
      }
      worst_g = std::max(worst_g, eg);
      worst_t = std::max(worst_t, et);
      ok[model] += eg <= 1e-6 && et <= 1e-5;
    }
  }
  return {ok[0] == 200 && ok[1] == 200 && ok[2] == 200,
          fmt("recovered sequential %d/200, double hurdle %d/200, multinomial %d/200; max error %.2e (latent %.2e)",
              ok[0], ok[1], ok[2], worst_g, worst_t)};
}

// --- 4. Measure oracles ----------------------------------------------------------

Outcome measure_oracles() {
  std::mt19937_64 rng(404);
  double worst_a = 0.0;
  // Independence products.
  for (std::size_t J : {1, 2, 3}) {
    for (int i = 0; i < 50; ++i) {
      std::vector<Interval> s;
      double v = 1.0;
      for (std::size_t j = 0; j < J; ++j) {
        s.push_back(random_interval(rng));
        v *= s.back().length();
      }
      worst_a = std::max(worst_a, std::abs(rect_measure(make_independence(J), R(s)) - v));
    }
  }
  // Comonotone copula: C(u, v) = min(u, v).
  for (int i = 0; i < 50; ++i) {
    const Interval a = random_interval(rng), b = random_interval(rng);
    const double v = std::max(0.0, std::min(a.hi, b.hi) - std::max(a.lo, b.lo));
    worst_a = std::max(worst_a, std::abs(rect_measure(make_gaussian_copula(1.0), R({a, b})) - v));
  }
  // Arcsine identity at the median, single and mixture.
  for (double rho = -0.95; rho < 0.96; rho += 0.05) {
    const double v = 0.25 + std::asin(rho) / (2 * std::numbers::pi);
    worst_a = std::max(worst_a, std::abs(rect_measure(make_gaussian_copula(rho), R({{0, 0.5}, {0, 0.5}})) - v));
  }
  {
    const double v = 0.25 + (0.3 * std::asin(-0.5) + 0.7 * std::asin(0.7)) / (2 * std::numbers::pi);
    worst_a = std::max(worst_a, std::abs(rect_measure(make_gaussian_mixture_copula({0.3, 0.7}, {-0.5, 0.7}),
                                                      R({{0, 0.5}, {0, 0.5}})) - v));
  }
  // Multinomial probit, rho = 0: P(V1 <= 0, V1 - V2 <= 0) = 3/8.
  worst_a = std::max(worst_a, std::abs(rect_measure(make_multinomial_probit(0.0), R({{0, 0.5}, {0, 1}, {0, 0.5}})) - 0.375));
  const bool analytic_ok = worst_a <= 1e-7;

  // Monte Carlo, 10^7 draws per family on a fixed 20-rectangle battery.
  struct Family {
    std::string name;
    UDistribution dist;
    std::function<void(std::mt19937_64&, double*)> draw;
  };
  auto gaussian_draw = [](std::vector<double> w, std::vector<double> rho) {
    return [w, rho](std::mt19937_64& g, double* u) {
      std::normal_distribution<double> n;
      std::uniform_real_distribution<double> U(0.0, 1.0);
      double r = rho[0];
      if (w.size() > 1) {
        double c = U(g), acc = 0.0;
        for (std::size_t m = 0; m < w.size(); ++m) {
          acc += w[m];
          if (c <= acc) {
            r = rho[m];
            break;
          }
        }
      }
      const double a = n(g), b = r * a + std::sqrt(1 - r * r) * n(g);
      u[0] = normal_cdf(a);
      u[1] = normal_cdf(b);
    };
  };
  auto probit_draw = [](double rho) {
    const MultinomialLatent ml{{1.0}, {rho}};
    return [rho, ml](std::mt19937_64& g, double* u) {
      std::normal_distribution<double> n;
      const double a = n(g), b = rho * a + std::sqrt(1 - rho * rho) * n(g);
      u[0] = normal_cdf(a);
      u[1] = normal_cdf(b);
      u[2] = latent_difference_cdf(ml, a - b);
    };
  };
  std::vector<Family> fams;
  fams.push_back({"independence", make_independence(2), [](std::mt19937_64& g, double* u) {
                    std::uniform_real_distribution<double> U(0.0, 1.0);
                    u[0] = U(g);
                    u[1] = U(g);
                  }});
  fams.push_back({"gaussian", make_gaussian_copula(0.6), gaussian_draw({1.0}, {0.6})});
  fams.push_back({"gaussian_mixture", make_gaussian_mixture_copula({0.4, 0.6}, {-0.7, 0.5}),
                  gaussian_draw({0.4, 0.6}, {-0.7, 0.5})});
  fams.push_back({"multinomial_probit", make_multinomial_probit(0.3), probit_draw(0.3)});

  const long N = 10'000'000;
  double worst_mc = 0.0;
  for (auto& f : fams) {
    const std::size_t J = dimension(f.dist);
    std::vector<Rect> battery;
    for (int i = 0; i < 20; ++i) {
      std::vector<Interval> s;
      for (std::size_t j = 0; j < J; ++j) s.push_back(random_interval(rng));
      battery.push_back(R(s));
    }
    std::vector<long> hits(battery.size(), 0);
    std::mt19937_64 g(9000 + fams.size());
    double u[3];
    for (long n = 0; n < N; ++n) {
      f.draw(g, u);
      for (std::size_t k = 0; k < battery.size(); ++k) {
        bool in = true;
        for (std::size_t j = 0; j < J && in; ++j) in = u[j] >= battery[k][j].lo && u[j] <= battery[k][j].hi;
        hits[k] += in;
      }
    }
    for (std::size_t k = 0; k < battery.size(); ++k) {
      const double mc = static_cast<double>(hits[k]) / static_cast<double>(N);
      worst_mc = std::max(worst_mc, std::abs(rect_measure(f.dist, battery[k]) - mc));
    }
  }
  return {analytic_ok && worst_mc <= 1e-3,
          fmt("analytic max error %.2e (tol 1e-7); Monte Carlo max error %.2e over 4 families x 20 rects (tol 1e-3)",
              worst_a, worst_mc)};
}

// --- 5. Partition validator ------------------------------------------------------

Outcome partitions() {
  std::mt19937_64 rng(505);
  std::uniform_int_distribution<int> count(1, 6), members(1, 3), snap(0, 1);
  std::uniform_int_distribution<int> grid(0, 10);
  int ok = 0, total = 0;
  std::string first_bad;
  for (std::size_t J : {1, 2, 3}) {
    for (int i = 0; i < 100; ++i) {
      std::vector<RectUnion> gens;
      const int n = count(rng);
      for (int g = 0; g < n; ++g) {
        RectUnion u(J);
        const int k = members(rng);
        for (int m = 0; m < k; ++m) {
          std::vector<Interval> s;
          for (std::size_t j = 0; j < J; ++j) {
            Interval iv = random_interval(rng);
            // Shared endpoints on a coarse grid exercise the merge logic.
            if (snap(rng)) iv = {grid(rng) / 10.0, 0.0}, iv.hi = std::min(1.0, iv.lo + grid(rng) / 10.0);
            s.push_back(iv);
          }
          u.add(R(s));
        }
        gens.push_back(std::move(u));
      }
      ++total;
      const Partition p = build_partition(gens, J);
      const auto rep = validate_partition(p, 1e-12);
      if (rep.ok()) {
        ++ok;
      } else if (first_bad.empty()) {
        first_bad = rep.detail;
      }
    }
  }
  return {ok == total, fmt("%d/%d generator sets pass coverage, disjointness, projection and tiling checks%s%s", ok,
                           total, first_bad.empty() ? "" : "; first failure: ", first_bad.c_str())};
}

// --- 6. Containment ----------------------------------------------------------------

struct Sampler {
  // Draws points of {A_eq a = b, l <= a <= u, A_le a <= c} by rejection
  // around an interior point, in the null space of A_eq.
  const LinearProgram& lp;
  Eigen::MatrixXd N;
  Eigen::VectorXd center;
  double radius = 0.1;

  bool feasible(const Eigen::VectorXd& a) const {
    for (std::size_t j = 0; j < lp.num_vars(); ++j) {
      if (a[j] < lp.lower[j] - 1e-12 || a[j] > lp.upper[j] + 1e-12) return false;
    }
    for (const auto& row : lp.le) {
      double s = 0.0;
      for (const auto& t : row.terms) s += t.coef * a[static_cast<Eigen::Index>(t.var)];
      if (s > row.rhs + 1e-12) return false;
    }
    return true;
  }
};

struct ContainmentStats {
  int dgps = 0, contained = 0, samples = 0, samples_ok = 0;
  double worst_excess = 0.0;
  double spread = 0.0;  // sum over instances of sampled theta range / (ub - lb)
  int spread_n = 0;
};

void containment_instance(const synth::Dgp& g, RunConfig cfg, const LambdaPoint& truth_lambda, double truth_anchor,
                          std::mt19937_64& rng, ContainmentStats& st) {
  ++st.dgps;
  const auto mt = synth::population_moments(g);
  const auto res = run_sweep(cfg, mt);
  const auto tr = compile_target(cfg.target, g.model, g.th, g.dists, mt);
  if (!tr.defined) return;
  const double theta = evaluate_target(tr.terms, g.dists, g.m);
  bool inside = false;
  for (const auto& iv : res.identified_set) inside = inside || (theta >= iv.lo - 1e-8 && theta <= iv.hi + 1e-8);
  st.contained += inside;

  // Feasible alpha at the true point must give theta inside that point's bounds.
  const PointRecord rec = run_point(cfg, mt, truth_lambda, truth_anchor);
  PointProblem pp = build_point_lp(cfg, mt, truth_lambda, truth_anchor);
  if (rec.status != PointStatus::Bounded || pp.early) return;
  const LinearProgram& lp = pp.lp;
  const std::size_t n = lp.num_vars();
  Eigen::MatrixXd A(static_cast<Eigen::Index>(lp.eq.size()), static_cast<Eigen::Index>(n));
  A.setZero();
  for (std::size_t i = 0; i < lp.eq.size(); ++i) {
    for (const auto& t : lp.eq[i].terms) A(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(t.var)) += t.coef;
  }
  Sampler s{lp, {}, Eigen::VectorXd::Zero(static_cast<Eigen::Index>(n))};
  s.N = A.rows() > 0 ? Eigen::MatrixXd(Eigen::FullPivLU<Eigen::MatrixXd>(A).kernel())
                     : Eigen::MatrixXd::Identity(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
  if (s.N.cols() > 0 && s.N.norm() > 0) s.N.colwise().normalize();
  // Interior point: average of optima for random objectives.
  std::normal_distribution<double> nd;
  int got = 0;
  for (int k = 0; k < 12; ++k) {
    LinearProgram q = lp;
    for (auto& c : q.c) c = nd(rng);
    const auto o = solve(q);
    if (o.status != LpStatus::Optimal) continue;
    s.center += Eigen::Map<const Eigen::VectorXd>(o.solution.data(), static_cast<Eigen::Index>(n));
    ++got;
  }
  if (got == 0) return;
  s.center /= got;
  const Eigen::Map<const Eigen::VectorXd> c(lp.c.data(), static_cast<Eigen::Index>(n));
  int accepted = 0, tries = 0, window = 0, window_ok = 0;
  double tmin = kInf, tmax = -kInf;
  while (accepted < 1000 && tries < 400000) {
    ++tries;
    Eigen::VectorXd t(s.N.cols());
    for (Eigen::Index i = 0; i < t.size(); ++i) t[i] = nd(rng) * s.radius;
    const Eigen::VectorXd a = s.center + s.N * t;
    const bool ok = s.feasible(a);
    ++window;
    window_ok += ok;
    if (window == 200) {
      if (window_ok < 10) s.radius *= 0.5;
      if (window_ok > 100) s.radius *= 1.5;
      window = window_ok = 0;
    }
    if (!ok) continue;
    ++accepted;
    const double th = pp.target.constant + c.dot(a);
    tmin = std::min(tmin, th);
    tmax = std::max(tmax, th);
    const double excess = std::max(rec.lb - th, th - rec.ub);
    st.worst_excess = std::max(st.worst_excess, excess);
    st.samples_ok += excess <= 1e-8;
  }
  st.samples += 1000;
  if (accepted > 0 && rec.ub - rec.lb > 1e-9) {
    st.spread += (tmax - tmin) / (rec.ub - rec.lb);
    ++st.spread_n;
  }
}

Outcome containment() {
  std::mt19937_64 rng(606);
  ContainmentStats st;
  const std::vector<double> rho_grid{-0.5, 0.0, 0.5};
  std::uniform_int_distribution<std::size_t> pick(0, rho_grid.size() - 1);
  for (int i = 0; i < 20; ++i) {
    // Binary, independence, two covariate cells.
    synth::Dgp g;
    g.model = SelectionModel{.n_z = 3, .n_x = 2};
    g.dists.assign(2, make_independence(1));
    g.th = synth::random_thresholds(g.model, rng, 0.05, 0.95);
    g.m = synth::random_linear_mtr(2, 2, 1, rng);
    RunConfig cfg;
    cfg.model = g.model;
    cfg.restrictions.bounds = std::pair{0.0, 1.0};
    containment_instance(g, cfg, {}, std::nan(""), rng, st);
  }
  for (int i = 0; i < 20; ++i) {
    const double rho = rho_grid[pick(rng)];
    synth::Dgp g;
    g.model = SelectionModel{.kind = ModelKind::Sequential, .n_z = 2};
    g.dists = {make_gaussian_copula(rho)};
    g.th = synth::random_thresholds(g.model, rng);
    g.m = synth::random_linear_mtr(1, 3, 2, rng);
    RunConfig cfg;
    cfg.model = g.model;
    cfg.family = Family::Gaussian;
    for (double r : rho_grid) cfg.lambdas.push_back({{}, {r}});
    cfg.lambdas.erase(cfg.lambdas.begin());
    cfg.restrictions.bounds = std::pair{0.0, 1.0};
    cfg.target.d1 = i % 2 ? 2 : 1;
    containment_instance(g, cfg, {{}, {rho}}, std::nan(""), rng, st);
  }
  const std::vector<double> anchors{0.4, 0.5, 0.6};
  for (int i = 0; i < 20; ++i) {
    const double rho = rho_grid[pick(rng)];
    const double anchor = anchors[pick(rng)];
    synth::Dgp g;
    g.model = SelectionModel{.kind = ModelKind::DoubleHurdle, .n_z = 4, .n_z1 = 2, .n_z2 = 2, .anchor = anchor};
    g.dists = {make_gaussian_copula(rho)};
    g.th = synth::random_double_hurdle_thresholds(g.model, rng);
    g.m = synth::random_linear_mtr(1, 2, 2, rng);
    RunConfig cfg;
    cfg.model = g.model;
    cfg.family = Family::Gaussian;
    for (double r : rho_grid) cfg.lambdas.push_back({{}, {r}});
    cfg.lambdas.erase(cfg.lambdas.begin());
    cfg.anchors = anchors;
    cfg.restrictions.bounds = std::pair{0.0, 1.0};
    containment_instance(g, cfg, {{}, {rho}}, anchor, rng, st);
  }
  const std::vector<double> probit_grid{0.0, 0.4};
  for (int i = 0; i < 20; ++i) {
    const double rho = probit_grid[static_cast<std::size_t>(i) % 2];
    synth::Dgp g;
    g.model = SelectionModel{.kind = ModelKind::Multinomial, .n_z = 2};
    g.dists = {make_multinomial_probit(rho)};
    g.th = synth::random_multinomial_thresholds(g.model, std::get<MultinomialLatent>(g.dists[0]), rng);
    g.m = synth::random_linear_mtr(1, 3, 3, rng);
    RunConfig cfg;
    cfg.model = g.model;
    cfg.family = Family::MultinomialProbit;
    cfg.lambdas.clear();
    for (double r : probit_grid) cfg.lambdas.push_back({{}, {r}});
    cfg.restrictions.bounds = std::pair{0.0, 1.0};
    cfg.target.d1 = i % 2 ? 2 : 1;
    containment_instance(g, cfg, {{}, {rho}}, std::nan(""), rng, st);
  }
  const bool ok = st.contained == st.dgps && st.samples_ok == st.samples && st.samples == 1000 * st.dgps;
  return {ok, fmt("truth inside identified set for %d/%d DGPs; %d/%d sampled feasible alpha inside [lb, ub] + 1e-8 "
                  "(worst excess %.2e, samples span %.0f%% of [lb, ub] on average)",
                  st.contained, st.dgps, st.samples_ok, st.samples, st.worst_excess,
                  st.spread_n ? 100.0 * st.spread / st.spread_n : 0.0)};
}

// --- 7. Refinement invariance ------------------------------------------------------

Outcome refinement() {
  std::mt19937_64 rng(707);
  std::uniform_real_distribution<double> U(0.0, 1.0);
  int ok = 0;
  double worst = 0.0;
  std::string failures;
  for (int i = 0; i < 20; ++i) {
    synth::Dgp g;
    const int kind = i % 3;
    const double rho = std::vector<double>{-0.5, 0.3, 0.6}[static_cast<std::size_t>(i) % 3];
    if (kind == 0) {
      g.model = SelectionModel{.n_z = 3, .n_x = 2};
      g.dists.assign(2, make_independence(1));
      g.th = synth::random_thresholds(g.model, rng, 0.05, 0.95);
    } else if (kind == 1) {
      g.model = SelectionModel{.kind = ModelKind::Sequential, .n_z = 2, .n_x = 2};
      g.dists.assign(2, make_gaussian_copula(rho));
      g.th = synth::random_thresholds(g.model, rng);
    } else {
      g.model = SelectionModel{.kind = ModelKind::DoubleHurdle, .n_z = 4, .n_x = 2, .n_z1 = 2, .n_z2 = 2, .anchor = 0.5};
      g.dists.assign(2, make_gaussian_copula(rho));
      g.th = synth::random_double_hurdle_thresholds(g.model, rng);
    }
    const std::size_t J = g.model.dim(), nd = g.model.n_d();
    // m = a_d + b_x + sum_j c_j u_j: increasing in d and in every u_j,
    // additively separable in x.
    std::vector<double> a(nd), b(2), c(J);
    for (std::size_t d = 0; d < nd; ++d) a[d] = 0.2 + 0.1 * static_cast<double>(d) + 0.1 * U(rng);
    for (auto& v : b) v = 0.1 * U(rng);
    for (auto& v : c) v = 0.25 / static_cast<double>(J) * U(rng);
    g.m = [a, b, c](std::size_t x, std::size_t d, std::span<const double> u) {
      double v = a[d] + b[x];
      for (std::size_t j = 0; j < u.size(); ++j) v += c[j] * u[j];
      return v;
    };
    const auto mt = synth::population_moments(g);
    RunConfig cfg;
    cfg.model = g.model;
    cfg.family = kind == 0 ? Family::Independence : Family::Gaussian;
    if (kind != 0) cfg.lambdas = {{{}, {rho}}};
    cfg.target.d1 = nd - 1;
    std::string set;
    if (U(rng) < 0.8) cfg.restrictions.bounds = std::pair{0.0, 1.0}, set += "B";
    if (U(rng) < 0.5) cfg.restrictions.md = {{nd - 1, 0}}, set += " MD";
    if (U(rng) < 0.5) cfg.restrictions.um = {{0, Direction::Increasing}}, set += " UM";
    if (U(rng) < 0.5) cfg.restrictions.us = {J - 1}, set += " US";
    if (set.empty()) cfg.restrictions.bounds = std::pair{0.0, 1.0}, set = "B";
    const LambdaPoint l = cfg.lambdas.front();
    const auto coarse = run_point(cfg, mt, l);
    cfg.basis.refine_rounds = 1;
    const auto fine = run_point(cfg, mt, l);
    auto diff = [](double x, double y) { return x == y ? 0.0 : std::abs(x - y); };
    const double d = coarse.status == fine.status && coarse.status == PointStatus::Bounded
                         ? std::max(diff(coarse.lb, fine.lb), diff(coarse.ub, fine.ub))
                         : (coarse.status == fine.status ? 0.0 : kInf);
    worst = std::max(worst, d);
    if (d < 1e-7 && coarse.status == PointStatus::Bounded) {
      ++ok;
    } else {
      failures += fmt(" [#%d %s rho=%.1f {%s}: %s/%s diff %.2e]", i, to_string(g.model.kind), kind ? rho : 0.0,
                      set.c_str(), to_string(coarse.status), to_string(fine.status), d);
    }
  }
  return {ok == 20, fmt("%d/20 instances unchanged within 1e-7 after doubling resolution, max change %.2e%s", ok,
                        worst, failures.c_str())};
}

// --- 8. LP vs vertex enumeration ---------------------------------------------------

struct Dense {
  std::vector<std::vector<double>> A;  // rows a . x <= b
  std::vector<double> b;
};

// Best objective over vertices of {A x <= b}; nullopt when no vertex is feasible.
std::optional<double> enumerate_vertices(const Dense& P, const std::vector<double>& c, bool maximize) {
  const std::size_t m = P.A.size(), n = c.size();
  std::vector<std::size_t> pick(n);
  for (std::size_t i = 0; i < n; ++i) pick[i] = i;
  std::optional<double> best;
  if (m < n) return best;
  while (true) {
    Eigen::MatrixXd M(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
    Eigen::VectorXd r(static_cast<Eigen::Index>(n));
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < n; ++j) M(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = P.A[pick[i]][j];
      r[static_cast<Eigen::Index>(i)] = P.b[pick[i]];
    }
    Eigen::FullPivLU<Eigen::MatrixXd> lu(M);
    if (lu.isInvertible() && std::abs(lu.determinant()) > 1e-9) {
      const Eigen::VectorXd x = lu.solve(r);
      bool feas = true;
      for (std::size_t i = 0; i < m && feas; ++i) {
        double s = 0.0;
        for (std::size_t j = 0; j < n; ++j) s += P.A[i][j] * x[static_cast<Eigen::Index>(j)];
        feas = s <= P.b[i] + 1e-9;
      }
      if (feas) {
        double v = 0.0;
        for (std::size_t j = 0; j < n; ++j) v += c[j] * x[static_cast<Eigen::Index>(j)];
        if (!best || (maximize ? v > *best : v < *best)) best = v;
      }
    }
    // Next combination.
    std::size_t i = n;
    while (i > 0 && pick[i - 1] == m - n + i - 1) --i;
    if (i == 0) break;
    ++pick[i - 1];
    for (std::size_t k = i; k < n; ++k) pick[k] = pick[k - 1] + 1;
  }
  return best;
}

Outcome lp_oracle() {
  std::mt19937_64 rng(808);
  std::uniform_int_distribution<int> nvar(1, 6), nrow(0, 5), coef(-5, 5), rhs(-4, 10), coin(0, 3);
  int ok = 0, infeasible_seen = 0;
  double worst = 0.0;
  std::string first_bad;
  for (int inst = 0; inst < 500; ++inst) {
    const std::size_t n = static_cast<std::size_t>(nvar(rng));
    LinearProgram lp;
    lp.sense = inst % 2 ? LinearProgram::Sense::Maximize : LinearProgram::Sense::Minimize;
    Dense P;
    std::vector<double> c(n);
    for (std::size_t j = 0; j < n; ++j) {
      const double lo = -static_cast<double>(coin(rng)), hi = static_cast<double>(1 + coin(rng));
      c[j] = coef(rng);
      // Some boxes become explicit rows on free variables.
      if (coin(rng) == 0) {
        const auto v = lp.add_variable("x" + std::to_string(j), -LinearProgram::kInfinity, LinearProgram::kInfinity, c[j]);
        lp.add_le({{v, 1.0}}, hi);
        lp.add_ge({{v, 1.0}}, lo);
      } else {
        lp.add_variable("x" + std::to_string(j), lo, hi, c[j]);
      }
      std::vector<double> e(n, 0.0);
      e[j] = 1.0;
      P.A.push_back(e);
      P.b.push_back(hi);
      e[j] = -1.0;
      P.A.push_back(e);
      P.b.push_back(-lo);
    }
    const int rows = nrow(rng);
    for (int i = 0; i < rows; ++i) {
      std::vector<double> a(n);
      std::vector<LpTerm> terms;
      for (std::size_t j = 0; j < n; ++j) {
        a[j] = coef(rng);
        if (a[j] != 0.0) terms.push_back({j, a[j]});
      }
      const double b = rhs(rng);
      const int type = coin(rng);
      if (type == 0) {
        lp.add_eq(terms, b);
        P.A.push_back(a);
        P.b.push_back(b);
        for (auto& v : a) v = -v;
        P.A.push_back(a);
        P.b.push_back(-b);
      } else if (type == 1) {
        lp.add_ge(terms, b);
        for (auto& v : a) v = -v;
        P.A.push_back(a);
        P.b.push_back(-b);
      } else {
        lp.add_le(terms, b);
        P.A.push_back(a);
        P.b.push_back(b);
      }
    }
    const auto want = enumerate_vertices(P, c, lp.sense == LinearProgram::Sense::Maximize);
    const auto got = solve(lp);
    bool good;
    if (!want) {
      ++infeasible_seen;
      good = got.status == LpStatus::Infeasible;
    } else {
      const double err = got.status == LpStatus::Optimal ? std::abs(got.value - *want) : kInf;
      worst = std::max(worst, err);
      good = err <= 1e-9;
    }
    ok += good;
    if (!good && first_bad.empty()) first_bad = fmt(" first mismatch at instance %d (%s)", inst, to_string(got.status));
  }

  // Constructed classification cases.
  int constructed_ok = 0;
  {
    LinearProgram lp;
    const auto x = lp.add_variable("x");
    lp.add_ge({{x, 1.0}}, 2.0);
    lp.add_le({{x, 1.0}}, 1.0);
    constructed_ok += solve(lp).status == LpStatus::Infeasible;
  }
  {
    LinearProgram lp;
    const auto x = lp.add_variable("x", -5, 5), y = lp.add_variable("y", -5, 5);
    lp.add_eq({{x, 1.0}, {y, 1.0}}, 1.0);
    lp.add_eq({{x, 2.0}, {y, 2.0}}, 3.0);
    constructed_ok += solve(lp).status == LpStatus::Infeasible;
  }
  {
    LinearProgram lp;
    lp.sense = LinearProgram::Sense::Maximize;
    lp.add_variable("x", 0.0, LinearProgram::kInfinity, 1.0);
    constructed_ok += solve(lp).status == LpStatus::Unbounded;
  }
  {
    // min x - y with x - y free along the ray x = y + t, t -> -inf.
    LinearProgram lp;
    const auto x = lp.add_variable("x", -LinearProgram::kInfinity, LinearProgram::kInfinity, 1.0);
    const auto y = lp.add_variable("y", 0.0, LinearProgram::kInfinity, -1.0);
    lp.add_le({{x, 1.0}, {y, -2.0}}, 3.0);
    constructed_ok += solve(lp).status == LpStatus::Unbounded;
  }
  {
    // Bounded despite free variables.
    LinearProgram lp;
    const auto x = lp.add_variable("x", -LinearProgram::kInfinity, LinearProgram::kInfinity, 1.0);
    lp.add_ge({{x, 1.0}}, -2.5);
    const auto o = solve(lp);
    constructed_ok += o.status == LpStatus::Optimal && std::abs(o.value + 2.5) <= 1e-12;
  }
  return {ok == 500 && constructed_ok == 5,
          fmt("%d/500 random polytopes match vertex enumeration within 1e-9 (max error %.2e, %d infeasible); "
              "%d/5 constructed infeasible/unbounded cases classified%s",
              ok, worst, infeasible_seen, constructed_ok, first_bad.c_str())};
}

// --- 9. CLI determinism ------------------------------------------------------------

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

Outcome determinism(const std::string& cli, const fs::path& samples) {
  const fs::path root = fs::temp_directory_path() / "mtebounds_acceptance";
  fs::remove_all(root);
  fs::create_directories(root);
  const std::vector<std::pair<std::string, std::string>> runs{{"binary_config.json", "binary_moments.json"},
                                                              {"sequential_config.json", "sequential_moments.json"},
                                                              {"double_hurdle_config.json", "double_hurdle_moments.json"},
                                                              {"multinomial_config.json", "multinomial_moments.json"}};
  int same = 0;
  std::string bad;
  for (const auto& [c, m] : runs) {
    std::vector<fs::path> outs;
    for (const char* w : {"1", "8", "1"}) {
      const fs::path out = root / (c + "_w" + w + "_" + std::to_string(outs.size()));
      const std::string cmd = cli + " --workers " + w + " bounds -c " + (samples / c).string() + " -m " +
                              (samples / m).string() + " -o " + out.string() + " > /dev/null 2>&1";
      const int rc = std::system(cmd.c_str());
      if (rc != 0) bad += " " + c + " exit " + std::to_string(rc);
      outs.push_back(out);
    }
    bool eq = true;
    for (const char* f : {"result.json", "lambda_table.csv"}) {
      const std::string ref = slurp(outs[0] / f);
      eq = eq && !ref.empty();
      for (std::size_t k = 1; k < outs.size(); ++k) eq = eq && slurp(outs[k] / f) == ref;
    }
    same += eq;
    if (!eq) bad += " " + c + " differs";
  }
  return {same == static_cast<int>(runs.size()) && bad.empty(),
          fmt("%d/%zu sample sweeps byte-identical across --workers 1, 8, 1%s", same, runs.size(), bad.c_str())};
}

}  // namespace

int main(int argc, char** argv) {
  if (argc < 3) {
    std::fprintf(stderr, "usage: %s <cli-binary> <samples-dir>\n", argv[0]);
    return 2;
  }
  const std::string cli = argv[1];
  const fs::path samples = argv[2];

  struct Criterion {
    int id;
    const char* name;
    double limit_s;
    std::function<Outcome()> run;
  };
  const std::vector<Criterion> criteria{
      {1, "Manski bound equivalence", 5, manski},
      {2, "Wald point identification of LATE", 5, wald},
      {3, "threshold round trip", 60, round_trip},
      {4, "measure oracles", 120, measure_oracles},
      {5, "partition validator", 30, partitions},
      {6, "containment of the true target", 600, containment},
      {7, "refinement invariance", 120, refinement},
      {8, "LP solver vs vertex enumeration", 30, lp_oracle},
      {9, "CLI determinism across worker counts", 600, [&] { return determinism(cli, samples); }},
  };
  int failed = 0;
  for (const auto& c : criteria) {
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    const bool in_time = secs < c.limit_s;
    const bool pass = o.pass && in_time;
    failed += !pass;
    std::printf("%s [%d] %s: %s (%.1f s, limit %.0f s%s)\n", pass ? "PASS" : "FAIL", c.id, c.name, o.detail.c_str(),
                secs, c.limit_s, in_time ? "" : ", exceeded");
    std::fflush(stdout);
  }
  return failed == 0 ? 0 : 1;
}
