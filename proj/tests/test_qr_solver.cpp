#include <gtest/gtest.h>

#include <random>

#include "iar/qr_solver.hpp"
#include "oracles.hpp"

namespace {

using iar::QrProblem;
using iar::StackedQrProblem;
using Eigen::MatrixXd;
using Eigen::VectorXd;

QrProblem median_problem(VectorXd w = VectorXd::Ones(3)) {
  VectorXd y(3);
  y << 1, 2, 9;
  return {y, MatrixXd::Ones(3, 1), w, 0.5};
}

QrProblem random_problem(std::mt19937_64& rng, int T, int K) {
  std::normal_distribution<double> n01;
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  QrProblem p;
  p.covariates = MatrixXd(T, K);
  p.targets = VectorXd(T);
  p.weights = VectorXd(T);
  for (int t = 0; t < T; ++t) {
    p.covariates(t, 0) = 1.0;
    for (int k = 1; k < K; ++k) p.covariates(t, k) = n01(rng);
    p.targets[t] = 0.5 * p.covariates.row(t).sum() + n01(rng);
    p.weights[t] = u01(rng) < 0.15 ? 0.0 : u01(rng) + 0.05;
  }
  p.tau = 0.1 * static_cast<double>(1 + rng() % 9);
  return p;
}

TEST(WeightedQr, MedianOfOddSample) {
  const auto s = iar::solve_weighted_qr(median_problem());
  EXPECT_DOUBLE_EQ(s.beta()[0], 2.0);
  EXPECT_DOUBLE_EQ(s.objective, 0.5 * 1 + 0.5 * 7);
}

TEST(WeightedQr, ZeroWeightTieBreaksToLowerEnd) {
  VectorXd w(3);
  w << 0, 1, 1;
  const auto s = iar::solve_weighted_qr(median_problem(w));
  EXPECT_DOUBLE_EQ(s.beta()[0], 2.0);
  EXPECT_EQ(s.status, iar::SolveStatus::degenerate_optimal);
}

TEST(WeightedQr, MatchesBasicSolutionOracle) {
  std::mt19937_64 rng(20240601);
  for (int rep = 0; rep < 200; ++rep) {
    const int K = 1 + static_cast<int>(rng() % 3);
    const int T = K + 3 + static_cast<int>(rng() % (10 - K));
    auto p = random_problem(rng, T, K);
    if (!iar::detail::collinear_columns(p.covariates, p.weights).empty() || (p.weights.array() > 0).count() < K) {
      continue;
    }
    const auto s = iar::solve_weighted_qr(p);
    const double oracle = iar::testing::basic_solution_minimum(p.targets, p.covariates, p.weights, p.tau);
    EXPECT_NEAR(s.objective, oracle, 1e-8 * (1.0 + oracle)) << "rep " << rep;
    EXPECT_TRUE(iar::check_optimality(p, s).pass) << "rep " << rep;
  }
}

TEST(WeightedQr, ObjectiveMatchesRecomputedLoss) {
  std::mt19937_64 rng(7);
  auto p = random_problem(rng, 200, 4);
  const auto s = iar::solve_weighted_qr(p);
  const double direct = iar::testing::weighted_check_loss(p.targets, p.covariates, p.weights, s.beta(), p.tau);
  EXPECT_NEAR(s.objective, direct, 1e-10 * direct);
  EXPECT_TRUE(iar::check_optimality(p, s).pass);
}

TEST(WeightedQr, ScaleEquivariance) {
  std::mt19937_64 rng(11);
  auto p = random_problem(rng, 60, 3);
  const auto a = iar::solve_weighted_qr(p);
  p.targets *= 3.5;
  const auto b = iar::solve_weighted_qr(p);
  EXPECT_TRUE(b.beta().isApprox(3.5 * a.beta(), 1e-9));
  EXPECT_NEAR(b.objective, 3.5 * a.objective, 1e-9 * b.objective);
}

TEST(WeightedQr, WeightInvariance) {
  std::mt19937_64 rng(12);
  auto p = random_problem(rng, 60, 3);
  const auto a = iar::solve_weighted_qr(p);
  p.weights *= 7.25;
  const auto b = iar::solve_weighted_qr(p);
  EXPECT_TRUE(b.beta().isApprox(a.beta(), 1e-9));
  EXPECT_NEAR(b.objective, 7.25 * a.objective, 1e-9 * b.objective);
}

TEST(WeightedQr, Deterministic) {
  std::mt19937_64 rng(13);
  auto p = random_problem(rng, 150, 4);
  const auto a = iar::solve_weighted_qr(p);
  const auto b = iar::solve_weighted_qr(p);
  EXPECT_EQ(a.beta(), b.beta());
}

TEST(WeightedQr, RankDeficientDesignNamesColumns) {
  MatrixXd X(5, 3);
  X << 1, 1, 2, 1, 2, 4, 1, 3, 6, 1, 4, 8, 1, 5, 10;
  VectorXd y = VectorXd::LinSpaced(5, 0, 4);
  try {
    iar::solve_weighted_qr({y, X, VectorXd::Ones(5), 0.5});
    FAIL() << "expected degeneracy error";
  } catch (const iar::Error& e) {
    EXPECT_EQ(e.kind(), iar::ErrorKind::degeneracy);
    EXPECT_NE(std::string(e.what()).find("collinear"), std::string::npos);
  }
}

TEST(WeightedQr, RejectsInvalidInput) {
  auto p = median_problem();
  p.tau = 1.0;
  EXPECT_THROW(iar::solve_weighted_qr(p), iar::Error);
  p = median_problem();
  p.weights[1] = -1.0;
  EXPECT_THROW(iar::solve_weighted_qr(p), iar::Error);
  p = median_problem();
  p.targets[0] = std::nan("");
  EXPECT_THROW(iar::solve_weighted_qr(p), iar::Error);
}

TEST(CheckOptimality, MedianPassesAndNonMinimiserFails) {
  const auto p = median_problem();
  const auto s = iar::solve_weighted_qr(p);
  EXPECT_TRUE(iar::check_optimality(p, s).pass);
  auto wrong = s;
  wrong.coefficients(0, 0) = 3.0;
  EXPECT_FALSE(iar::check_optimality(p, wrong).pass);
}

TEST(StackedQr, NoConstraintsDecouples) {
  std::mt19937_64 rng(21);
  auto p = random_problem(rng, 80, 3);
  StackedQrProblem sp{p.targets, p.covariates, p.weights, {0.1, 0.5, 0.9}, 0, {}};
  const auto s = iar::solve_stacked_qr(sp);
  for (int q = 0; q < 3; ++q) {
    const auto single = iar::solve_weighted_qr({p.targets, p.covariates, p.weights, sp.taus[q]});
    EXPECT_EQ(s.beta(q), single.beta());
  }
}

TEST(StackedQr, EqualityRowsOnTwoPointSample) {
  VectorXd y(2);
  y << -1, 1;
  StackedQrProblem sp{y, MatrixXd::Ones(2, 1), VectorXd::Ones(2), {0.25, 0.75}, 0, {}};
  VectorXd a(1);
  a << 1.0;
  sp.constraints.push_back(iar::adjacent_row(a, 1, 1));
  sp.constraints.push_back(iar::adjacent_row(-a, 1, 1));
  const auto s = iar::solve_stacked_qr(sp);
  EXPECT_NEAR(s.coefficients(0, 0), s.coefficients(1, 0), 1e-12);
  // Summed loss is flat at 2 on [-1, 1].
  EXPECT_NEAR(s.objective, 2.0, 1e-12);
}

TEST(StackedQr, ConstraintsRestoreMonotonicityAndCostObjective) {
  // Quantiles cross at the right edge without constraints: spread shrinks in x.
  std::mt19937_64 rng(5);
  std::normal_distribution<double> n01;
  const int T = 40;
  MatrixXd X(T, 2);
  VectorXd y(T);
  for (int t = 0; t < T; ++t) {
    const double x = static_cast<double>(t) / (T - 1);
    X(t, 0) = 1.0;
    X(t, 1) = x;
    y[t] = (1.2 - x) * n01(rng);
  }
  const std::vector<double> taus{0.3, 0.35, 0.4, 0.45, 0.5};
  StackedQrProblem free{y, X, VectorXd::Ones(T), taus, 0, {}};
  const auto unconstrained = iar::solve_stacked_qr(free);

  StackedQrProblem bound = free;
  for (Eigen::Index q = 1; q < 5; ++q) {
    for (int t = 0; t < T; ++t) bound.constraints.push_back(iar::adjacent_row(X.row(t).transpose(), q, 2));
  }
  const auto constrained = iar::solve_stacked_qr(bound);
  EXPECT_GE(constrained.objective, unconstrained.objective - 1e-10);
  for (int t = 0; t < T; ++t) {
    for (Eigen::Index q = 1; q < 5; ++q) {
      EXPECT_LE(X.row(t).dot(constrained.beta(q - 1)), X.row(t).dot(constrained.beta(q)) + 1e-8);
    }
  }
}

TEST(CompositeQr, SingleQuantileMatchesWeightedQr) {
  std::mt19937_64 rng(31);
  auto p = random_problem(rng, 120, 4);
  p.tau = 0.35;
  const auto a = iar::solve_weighted_qr(p);
  const auto b = iar::solve_composite_qr(p.targets, p.covariates, p.weights, {0.35});
  EXPECT_TRUE((a.beta() - b.beta()).cwiseAbs().maxCoeff() <= 1e-9);
}

TEST(CompositeQr, InterceptOnlyGivesWeightedQuantiles) {
  std::mt19937_64 rng(32);
  auto p = random_problem(rng, 50, 1);
  const std::vector<double> taus{0.2, 0.5, 0.8};
  const auto c = iar::solve_composite_qr(p.targets, p.covariates, p.weights, taus);
  for (int q = 0; q < 3; ++q) {
    const auto single = iar::solve_weighted_qr({p.targets, p.covariates, p.weights, taus[q]});
    const double oracle = iar::testing::basic_solution_minimum(p.targets, p.covariates, p.weights, taus[q]);
    EXPECT_NEAR(iar::testing::weighted_check_loss(p.targets, p.covariates, p.weights, c.beta(q), taus[q]), oracle,
                1e-9);
    EXPECT_NEAR(single.objective, oracle, 1e-9);
  }
  EXPECT_LE(c.coefficients(0, 0), c.coefficients(1, 0));
  EXPECT_LE(c.coefficients(1, 0), c.coefficients(2, 0));
}

TEST(CompositeQr, LocationShiftRecoversSlopeAndErrorQuantiles) {
  std::mt19937_64 rng(33);
  std::normal_distribution<double> n01;
  const int T = 5000;
  MatrixXd X(T, 2);
  VectorXd y(T);
  for (int t = 0; t < T; ++t) {
    X(t, 0) = 1.0;
    X(t, 1) = 2.0 * n01(rng);
    y[t] = X(t, 1) + n01(rng);
  }
  const std::vector<double> taus{0.1, 0.5, 0.9};
  const auto c = iar::solve_composite_qr(y, X, VectorXd::Ones(T), taus);
  EXPECT_NEAR(c.coefficients(0, 1), 1.0, 0.03);
  EXPECT_NEAR(c.coefficients(0, 0), -1.2815515655446004, 0.06);
  EXPECT_NEAR(c.coefficients(1, 0), 0.0, 0.05);
  EXPECT_NEAR(c.coefficients(2, 0), 1.2815515655446004, 0.06);
}

}  // namespace
