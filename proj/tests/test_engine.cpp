#include <cmath>

#include <gtest/gtest.h>

#include "dgp.hpp"
#include "mtebounds/engine.hpp"

using namespace mtebounds;

namespace {
RunConfig binary_config(std::size_t n_z) {
  RunConfig c;
  c.model.n_z = n_z;
  c.restrictions.bounds = std::pair{0.0, 1.0};
  return c;
}
}  // namespace

TEST(Engine, ManskiBounds) {
  auto mt = MomentTable::zeros(2, 1, 1);
  mt.p[0][0] = {0.5, 0.5};
  mt.e[0][0] = {0.1, 0.2};
  const auto r = run_point(binary_config(1), mt, {});
  ASSERT_EQ(r.status, PointStatus::Bounded) << r.message;
  EXPECT_NEAR(r.lb, -0.4, 1e-10);
  EXPECT_NEAR(r.ub, 0.6, 1e-10);
}

TEST(Engine, WaldLate) {
  auto mt = MomentTable::zeros(2, 2, 1);
  mt.p[0][0] = {0.7, 0.3};
  mt.p[0][1] = {0.3, 0.7};
  mt.e[0][0] = {0.21, 0.15};
  mt.e[0][1] = {0.06, 0.42};
  auto c = binary_config(2);
  c.target = TargetSpec{.kind = TargetKind::LATE, .response = {{0, 0}, {1, 1}}};
  const auto r = run_point(c, mt, {});
  ASSERT_EQ(r.status, PointStatus::Bounded) << r.message;
  const double wald = (0.06 + 0.42 - 0.21 - 0.15) / 0.4;
  EXPECT_NEAR(r.lb, wald, 1e-8);
  EXPECT_NEAR(r.ub, wald, 1e-8);
}

TEST(Engine, RejectedPointBuildsNoLp) {
  RunConfig c;
  c.model = SelectionModel{.kind = ModelKind::DoubleHurdle, .n_z = 1, .n_z1 = 1, .n_z2 = 1, .anchor = 0.5};
  c.family = Family::Independence;
  auto mt = MomentTable::zeros(2, 1, 1);
  mt.p[0][0] = {0.3, 0.7};
  const auto r = run_point(c, mt, {});
  EXPECT_EQ(r.status, PointStatus::Rejected);
  EXPECT_EQ(r.variables, 0u);
}

TEST(Engine, UnboundedWithoutBounds) {
  auto mt = MomentTable::zeros(2, 1, 1);
  mt.p[0][0] = {0.5, 0.5};
  RunConfig c;
  const auto r = run_point(c, mt, {});
  ASSERT_EQ(r.status, PointStatus::Bounded);
  EXPECT_EQ(r.lb, -kInf);
  EXPECT_EQ(r.ub, kInf);
}

TEST(Engine, InfeasibleOutcomeMoments) {
  auto mt = MomentTable::zeros(2, 1, 1);
  mt.p[0][0] = {0.5, 0.5};
  mt.e[0][0] = {0.9, 0.1};  // E[Y 1{D=0}] > P(D=0) * upper bound
  const auto r = run_point(binary_config(1), mt, {});
  EXPECT_EQ(r.status, PointStatus::InfeasibleOutcomeMoments);
}

TEST(Engine, ConstantOnlyTarget) {
  auto mt = MomentTable::zeros(2, 2, 1);
  mt.p[0][0] = {0.3, 0.7};
  mt.p[0][1] = {0.7, 0.3};
  mt.e[0][0] = {0.1, 0.3};
  mt.e[0][1] = {0.3, 0.1};
  auto c = binary_config(2);
  c.target = TargetSpec{.kind = TargetKind::LATEGroupProb, .response = {{0, 1}, {1, 0}}};
  const auto r = run_point(c, mt, {});
  ASSERT_EQ(r.status, PointStatus::Bounded);
  EXPECT_NEAR(r.lb, 0.4, 1e-12);
  EXPECT_NEAR(r.ub, 0.4, 1e-12);
}

TEST(Engine, UnionIntervals) {
  EXPECT_EQ(union_intervals({{0.1, 0.3}, {0.2, 0.5}, {0.7, 0.8}}), (std::vector<Interval1>{{0.1, 0.5}, {0.7, 0.8}}));
  EXPECT_TRUE(union_intervals({}).empty());
  EXPECT_EQ(union_intervals({{0, 0.2}, {0.2, 0.4}}), (std::vector<Interval1>{{0, 0.4}}));
  EXPECT_EQ(union_intervals({{0.3, 0.7}, {0, 0.4}}), (std::vector<Interval1>{{0, 0.7}}));
}

TEST(Engine, SweepSinglePointEqualsPoint) {
  auto mt = MomentTable::zeros(2, 1, 1);
  mt.p[0][0] = {0.5, 0.5};
  mt.e[0][0] = {0.1, 0.2};
  const auto res = run_sweep(binary_config(1), mt);
  ASSERT_EQ(res.identified_set.size(), 1u);
  EXPECT_NEAR(res.identified_set[0].lo, -0.4, 1e-10);
  EXPECT_NEAR(res.identified_set[0].hi, 0.6, 1e-10);
  EXPECT_FALSE(res.rejected_everywhere);
}

TEST(Engine, SweepAllRejected) {
  RunConfig c;
  c.model = SelectionModel{.kind = ModelKind::DoubleHurdle, .n_z = 1, .n_z1 = 1, .n_z2 = 1};
  c.family = Family::Gaussian;
  c.lambdas = {{{}, {0.0}}, {{}, {0.5}}};
  c.anchors = {0.2, 0.3};
  auto mt = MomentTable::zeros(2, 1, 1);
  mt.p[0][0] = {0.4, 0.6};
  const auto res = run_sweep(c, mt);
  EXPECT_EQ(res.records.size(), 4u);
  EXPECT_TRUE(res.identified_set.empty());
  EXPECT_TRUE(res.rejected_everywhere);
}

TEST(Engine, SweepIndependentOfWorkers) {
  std::mt19937_64 rng(5);
  synth::Dgp g;
  g.model = SelectionModel{.kind = ModelKind::Sequential, .n_z = 2};
  g.dists = {make_gaussian_copula(0.2)};
  g.th = synth::random_thresholds(g.model, rng);
  g.m = synth::random_linear_mtr(1, 3, 2, rng);
  const auto mt = synth::population_moments(g);
  RunConfig c;
  c.model = g.model;
  c.family = Family::Gaussian;
  for (double r = -0.6; r <= 0.61; r += 0.2) c.lambdas.push_back({{}, {r}});
  c.lambdas.erase(c.lambdas.begin());
  c.restrictions.bounds = std::pair{0.0, 1.0};
  c.target.d1 = 2;
  c.workers = 1;
  const auto a = run_sweep(c, mt);
  c.workers = 4;
  const auto b = run_sweep(c, mt);
  ASSERT_EQ(a.records.size(), b.records.size());
  for (std::size_t i = 0; i < a.records.size(); ++i) {
    EXPECT_EQ(a.records[i].index, i);
    EXPECT_EQ(a.records[i].lb, b.records[i].lb);
    EXPECT_EQ(a.records[i].ub, b.records[i].ub);
  }
  EXPECT_EQ(a.identified_set, b.identified_set);
}

TEST(Engine, BernsteinContainsTruth) {
  std::mt19937_64 rng(9);
  synth::Dgp g;
  g.model = SelectionModel{.n_z = 3};
  g.dists = {make_independence(1)};
  g.th = synth::random_thresholds(g.model, rng);
  g.m = synth::random_linear_mtr(1, 2, 1, rng);
  const auto mt = synth::population_moments(g);
  RunConfig c;
  c.model = g.model;
  c.restrictions.bounds = std::pair{0.0, 1.0};
  c.basis.mode = BasisMode::Bernstein;
  c.basis.degree = {2};
  const auto r = run_point(c, mt, {});
  ASSERT_EQ(r.status, PointStatus::Bounded) << r.message;
  const auto tr = compile_target(c.target, g.model, g.th, g.dists, mt);
  const double truth = evaluate_target(tr.terms, g.dists, g.m);
  EXPECT_LE(r.lb, truth + 1e-8);
  EXPECT_GE(r.ub, truth - 1e-8);
}
