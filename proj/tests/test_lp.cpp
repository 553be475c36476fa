#include <cmath>

#include <gtest/gtest.h>

#include "mtebounds/lp.hpp"

using namespace mtebounds;

TEST(Lp, MaxSingleVariable) {
  LinearProgram lp;
  lp.sense = LinearProgram::Sense::Maximize;
  const auto x = lp.add_variable("x", 0.0, LinearProgram::kInfinity, 1.0);
  lp.add_le({{x, 1.0}}, 1.0, "cap");
  const auto o = solve(lp);
  ASSERT_EQ(o.status, LpStatus::Optimal);
  EXPECT_NEAR(o.value, 1.0, 1e-12);
  EXPECT_NEAR(o.solution[x], 1.0, 1e-12);
}

TEST(Lp, Infeasible) {
  LinearProgram lp;
  const auto x = lp.add_variable("x");
  lp.add_ge({{x, 1.0}}, 2.0, "lo");
  lp.add_le({{x, 1.0}}, 1.0, "hi");
  EXPECT_EQ(solve(lp).status, LpStatus::Infeasible);
}

TEST(Lp, Unbounded) {
  LinearProgram lp;
  lp.sense = LinearProgram::Sense::Maximize;
  lp.add_variable("x", 0.0, LinearProgram::kInfinity, 1.0);
  EXPECT_EQ(solve(lp).status, LpStatus::Unbounded);
}

TEST(Lp, EqualitiesAndFreeVariables) {
  // min x + y  s.t. x - y = 1, x + 2y >= 4, y free, x in [0, 10]
  LinearProgram lp;
  const auto x = lp.add_variable("x", 0.0, 10.0, 1.0);
  const auto y = lp.add_variable("y", -LinearProgram::kInfinity, LinearProgram::kInfinity, 1.0);
  lp.add_eq({{x, 1.0}, {y, -1.0}}, 1.0, "e");
  lp.add_ge({{x, 1.0}, {y, 2.0}}, 4.0, "g");
  const auto o = solve(lp);
  ASSERT_EQ(o.status, LpStatus::Optimal);
  EXPECT_NEAR(o.solution[x], 2.0, 1e-10);
  EXPECT_NEAR(o.solution[y], 1.0, 1e-10);
  EXPECT_NEAR(o.value, 3.0, 1e-10);
  EXPECT_LT(o.max_residual, 1e-10);
}

TEST(Lp, DegenerateCycleExample) {
  // Beale's cycling example; Dantzig pricing without anti-cycling loops.
  LinearProgram lp;
  const auto x4 = lp.add_variable("x4", 0, LinearProgram::kInfinity, -0.75);
  const auto x5 = lp.add_variable("x5", 0, LinearProgram::kInfinity, 150);
  const auto x6 = lp.add_variable("x6", 0, LinearProgram::kInfinity, -0.02);
  const auto x7 = lp.add_variable("x7", 0, LinearProgram::kInfinity, 6);
  lp.add_le({{x4, 0.25}, {x5, -60}, {x6, -0.04}, {x7, 9}}, 0, "r1");
  lp.add_le({{x4, 0.5}, {x5, -90}, {x6, -0.02}, {x7, 3}}, 0, "r2");
  lp.add_le({{x6, 1}}, 1, "r3");
  const auto o = solve(lp);
  ASSERT_EQ(o.status, LpStatus::Optimal);
  EXPECT_NEAR(o.value, -0.05, 1e-10);
}

TEST(Lp, ExportImportRoundTrip) {
  LinearProgram lp;
  lp.sense = LinearProgram::Sense::Maximize;
  const auto x = lp.add_variable("x", 0.0, LinearProgram::kInfinity, 1.0);
  const auto y = lp.add_variable("y", -1.0, 2.0, 0.0);
  lp.add_le({{x, 1.0}, {y, 0.5}}, 1.0, "cap");
  const std::string a = export_lp(lp);
  EXPECT_EQ(a, export_lp(lp));
  const LinearProgram back = import_lp(a);
  EXPECT_EQ(export_lp(back), a);
  const auto o = solve(back);
  ASSERT_EQ(o.status, LpStatus::Optimal);
  EXPECT_NEAR(o.value, 1.5, 1e-12);
}

TEST(Lp, ExportEmptyObjective) {
  LinearProgram lp;
  lp.add_variable("x", 0.0, 1.0, 0.0);
  const std::string s = export_lp(lp);
  EXPECT_NE(s.find(" obj:"), std::string::npos);
  EXPECT_EQ(solve(import_lp(s)).status, LpStatus::Optimal);
}
