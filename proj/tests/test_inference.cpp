#include <gtest/gtest.h>

#include <cmath>
#include <mutex>
#include <sstream>

#include "iar/inference.hpp"
#include "iar/synthetic.hpp"

namespace {

using Eigen::MatrixXd;
using Eigen::VectorXd;
using iar::BandwidthSpec;

VectorXd vec(std::initializer_list<double> v) {
  VectorXd out(static_cast<Eigen::Index>(v.size()));
  Eigen::Index i = 0;
  for (double x : v) out[i++] = x;
  return out;
}

iar::DesignSet synthetic_design(iar::Dgp dgp, iar::Index T, std::uint64_t seed) {
  iar::SyntheticSpec s;
  s.dgp = dgp;
  s.T = T;
  s.seed = seed;
  return iar::build_design(iar::generate_synthetic(s), 1);
}

TEST(BlockBootstrap, DefaultBlockLengthIsCeilCubeRoot) {
  EXPECT_EQ(iar::default_block_length(1), 1);
  EXPECT_EQ(iar::default_block_length(8), 2);
  EXPECT_EQ(iar::default_block_length(9), 3);
  EXPECT_EQ(iar::default_block_length(200), 6);
  EXPECT_EQ(iar::default_block_length(2000), 13);
}

TEST(BlockBootstrap, FullLengthBlockIsARotation) {
  std::mt19937_64 rng(1);
  for (int rep = 0; rep < 10; ++rep) {
    const auto rows = iar::circular_block_rows(17, 17, rng);
    ASSERT_EQ(rows.size(), 17u);
    for (std::size_t i = 1; i < rows.size(); ++i) EXPECT_EQ(rows[i], (rows[i - 1] + 1) % 17);
  }
}

TEST(BlockBootstrap, BlocksAreConsecutiveAndWrap) {
  std::mt19937_64 rng(2);
  const auto rows = iar::circular_block_rows(10, 4, rng);
  ASSERT_EQ(rows.size(), 10u);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (i % 4 != 0) {
      EXPECT_EQ(rows[i], (rows[i - 1] + 1) % 10);
    }
  }
}

TEST(BlockBootstrap, SeededRunsAreIdentical) {
  const auto d = synthetic_design(iar::Dgp::location_shift, 120, 3);
  const iar::FitFn fit = [](const iar::DesignSet& x) { return iar::fit_qar(x, {0.25, 0.5, 0.75}, 1, false); };
  const auto a = iar::block_bootstrap(d, fit, 20, 5, 99);
  iar::set_default_jobs(3);
  const auto b = iar::block_bootstrap(d, fit, 20, 5, 99);
  iar::set_default_jobs(1);
  ASSERT_EQ(a.replicates.size(), 20u);
  for (std::size_t r = 0; r < 20; ++r) EXPECT_EQ(a.replicates[r].values, b.replicates[r].values);
  const auto c = iar::block_bootstrap(d, fit, 20, 5, 100);
  EXPECT_NE(a.replicates[0].values, c.replicates[0].values);
}

TEST(BlockBootstrap, FullLengthBlocksOnDeterministicDesignHaveNoSpread) {
  auto d = synthetic_design(iar::Dgp::location_shift, 60, 4);
  // A deterministic target: every rotation carries the same rows.
  d.target = d.covariates * vec({1.0, 0.5, 0.2, -0.1, 0.3});
  const iar::FitFn fit = [](const iar::DesignSet& x) { return iar::fit_qar(x, {0.5}, 1, false); };
  const auto ens = iar::block_bootstrap(d, fit, 10, d.rows(), 5);
  for (double v : iar::replicate_variance(ens)) EXPECT_LT(v, 1e-20);
}

TEST(BlockBootstrap, FailingReplicatesAreDroppedUpToTheLimit) {
  const auto d = synthetic_design(iar::Dgp::location_shift, 50, 6);
  int calls = 0;
  std::mutex mu;
  const iar::FitFn flaky = [&](const iar::DesignSet& x) {
    std::lock_guard<std::mutex> lock(mu);
    if (calls++ % 10 == 0) throw iar::Error(iar::ErrorKind::degeneracy, "boom");
    return iar::fit_qar(x, {0.5}, 1, false);
  };
  const auto ens = iar::block_bootstrap(d, flaky, 20, 4, 7);
  EXPECT_EQ(ens.dropped, 2);
  EXPECT_EQ(ens.replicates.size(), 18u);
  EXPECT_EQ(ens.ids.size(), 18u);
  const iar::FitFn broken = [](const iar::DesignSet&) -> iar::CoefficientCube {
    throw iar::Error(iar::ErrorKind::degeneracy, "boom");
  };
  try {
    iar::block_bootstrap(d, broken, 10, 4, 7);
    FAIL();
  } catch (const iar::Error& e) {
    EXPECT_EQ(e.kind(), iar::ErrorKind::inference);
  }
}

TEST(BlockBootstrap, SdMatchesMonteCarloOnIidData) {
  const int T = 200;
  auto design = [&](std::uint64_t seed) {
    iar::SyntheticSpec s;
    s.dgp = iar::Dgp::momentum_free;
    s.rho = 0.0;
    s.T = T;
    s.seed = seed;
    return iar::build_design(iar::generate_synthetic(s), 1);
  };
  const iar::FitFn fit = [](const iar::DesignSet& x) { return iar::fit_qar(x, {0.5}, 1, false); };
  double mc_mean = 0.0, mc_sq = 0.0;
  const int reps = 200;
  for (int r = 0; r < reps; ++r) {
    const double b = fit(design(1000 + r)).at(0, 0, 1);
    mc_mean += b / reps;
    mc_sq += b * b / reps;
  }
  const double mc_sd = std::sqrt((mc_sq - mc_mean * mc_mean) * reps / (reps - 1));
  const auto ens = iar::block_bootstrap(design(1), fit, 200, iar::default_block_length(T), 11);
  const double boot_sd = std::sqrt(iar::replicate_variance(ens)[1]);
  EXPECT_NEAR(boot_sd / mc_sd, 1.0, 0.3);
}

TEST(HausmanStatistic, ZeroDifferenceIsZero) {
  const auto h = iar::hausman_statistic(vec({0.4, -1.0}), vec({0.4, -1.0, 0.4, -1.0}), vec({0.1, 0.1}),
                                        vec({0.5, 0.3, 0.2, 0.9}));
  EXPECT_EQ(h.statistic, 0.0);
  EXPECT_EQ(h.dof, 4);
  EXPECT_EQ(h.p_value, 1.0);
}

TEST(HausmanStatistic, HandEvaluation) {
  const auto h = iar::hausman_statistic(vec({0.0}), vec({-1.0, 0.0}), vec({0.0}), vec({1.0, 2.0}));
  EXPECT_DOUBLE_EQ(h.statistic, 1.0);
  EXPECT_EQ(h.dof, 2);
  // Survival function of chi2(2) is exp(-x/2).
  EXPECT_NEAR(h.p_value, std::exp(-0.5), 1e-12);
}

TEST(HausmanStatistic, NegativeVarianceDifferencesAreTruncated) {
  const auto h = iar::hausman_statistic(vec({0.0}), vec({-1.0, 2.0}), vec({1.5}), vec({2.5, 1.0}));
  EXPECT_DOUBLE_EQ(h.statistic, 1.0);
  EXPECT_EQ(h.dof, 1);
}

TEST(HausmanStatistic, ZeroVarianceIsDegenerate) {
  const auto h = iar::hausman_statistic(vec({0.0}), vec({1.0, 2.0}), vec({0.0}), vec({0.0, 0.0}));
  EXPECT_TRUE(h.degenerate);
  EXPECT_EQ(h.p_value, 1.0);
  EXPECT_FALSE(h.warning.empty());
}

TEST(HausmanStatistic, PermutationInvariant) {
  const VectorXd bC = vec({0.3, -0.2, 1.1, 0.7}), vC = vec({0.5, 0.2, 0.9, 0.4});
  const auto a = iar::hausman_statistic(vec({0.1}), bC, vec({0.05}), vC);
  const VectorXd pC = vec({1.1, 0.3, 0.7, -0.2}), pV = vec({0.9, 0.5, 0.4, 0.2});
  const auto b = iar::hausman_statistic(vec({0.1}), pC, vec({0.05}), pV);
  EXPECT_NEAR(a.statistic, b.statistic, 1e-12);
}

TEST(HausmanStatistic, ScaledReferenceMoments) {
  const VectorXd bC = vec({0.5, -0.5, 0.25}), vC = vec({1.0, 1.0, 1.0});
  // Independent d: same as chi2(dof).
  const MatrixXd indep = MatrixXd::Identity(3, 3);
  const auto a = iar::hausman_statistic(vec({0.0}), bC, vec({0.0}), vC, &indep);
  const auto plain = iar::hausman_statistic(vec({0.0}), bC, vec({0.0}), vC);
  EXPECT_DOUBLE_EQ(a.scale, 1.0);
  EXPECT_DOUBLE_EQ(a.effective_dof, 3.0);
  EXPECT_NEAR(a.p_value, plain.p_value, 1e-12);
  // Perfectly correlated d: H = 3 chi2(1).
  const MatrixXd same = MatrixXd::Ones(3, 3);
  const auto b = iar::hausman_statistic(vec({0.0}), bC, vec({0.0}), vC, &same);
  EXPECT_DOUBLE_EQ(b.scale, 3.0);
  EXPECT_DOUBLE_EQ(b.effective_dof, 1.0);
  EXPECT_NEAR(b.p_value, std::erfc(std::sqrt(b.statistic / 3.0 / 2.0)), 1e-12);
}

struct MapFixture {
  std::vector<double> taus{0.1, 0.5, 0.9};
  iar::ConditioningGrid grid{std::vector<double>{-1.6, -0.8, 0.0, 0.8, 1.6}};
  BandwidthSpec spec = BandwidthSpec::from_percent(40);

  iar::HausmanMaps run(const iar::DesignSet& d, int B, std::uint64_t seed) const {
    const auto L = iar::default_block_length(d.rows());
    auto est = [&](const iar::FitFn& f) { return iar::Estimate{f(d), iar::block_bootstrap(d, f, B, L, seed)}; };
    const auto cpqr = est([&](const iar::DesignSet& x) { return iar::fit_cpqr(x, taus, grid, spec, true); });
    const auto cqr = est([&](const iar::DesignSet& x) { return iar::fit_cqr(x, taus, grid, spec); });
    const auto qar2 = est([&](const iar::DesignSet& x) { return iar::fit_qar(x, taus, 2, false); });
    return iar::hausman_maps(cpqr, cqr, qar2, 0.05);
  }
};

double rejection_rate(const std::vector<iar::MapCell>& cells) {
  double s = 0.0;
  for (const auto& c : cells) s += c.decision;
  return s / static_cast<double>(cells.size());
}

TEST(HausmanMaps, ShapeDeterminismAndRoundTrip) {
  const MapFixture f;
  const auto d = synthetic_design(iar::Dgp::location_shift, 300, 8);
  const auto a = f.run(d, 20, 3);
  // Four slope covariates, each with 5 grid cells and 3 tau cells.
  EXPECT_EQ(a.cells.size(), 4u * (5u + 3u));
  EXPECT_EQ(a.select("inflation", "quantile").size(), 5u);
  EXPECT_EQ(a.select("nfci", "momentum").size(), 3u);
  EXPECT_TRUE(a.select("intercept", "quantile").empty());
  EXPECT_FALSE(a.caveat.empty());
  const auto b = f.run(d, 20, 3);
  std::ostringstream sa, sb;
  iar::write_maps(sa, a.cells);
  iar::write_maps(sb, b.cells);
  EXPECT_EQ(sa.str(), sb.str());
  std::istringstream in(sa.str());
  const auto back = iar::read_maps(in);
  ASSERT_EQ(back.size(), a.cells.size());
  for (std::size_t i = 0; i < back.size(); ++i) {
    EXPECT_EQ(back[i].covariate, a.cells[i].covariate);
    EXPECT_EQ(back[i].coordinate, a.cells[i].coordinate);
    EXPECT_EQ(back[i].p_value, a.cells[i].p_value);
    EXPECT_EQ(back[i].decision, a.cells[i].decision);
  }
}

TEST(HausmanMaps, HeteroskedasticSlopeShowsQuantileVariationOnly) {
  const MapFixture f;
  const auto d = synthetic_design(iar::Dgp::heteroskedastic, 1000, 9);
  const auto maps = f.run(d, 100, 4);
  EXPECT_GE(rejection_rate(maps.select("gdp", "quantile")), 0.8);
  EXPECT_LE(rejection_rate(maps.select("gdp", "momentum")), 1.0 / 3.0);
}

TEST(HausmanMaps, RejectsNonpositiveLevel) {
  const MapFixture f;
  const auto d = synthetic_design(iar::Dgp::location_shift, 150, 10);
  iar::Estimate e{iar::fit_qar(d, f.taus, 2, false), {}};
  EXPECT_THROW(iar::hausman_maps(e, e, e, 0.0), iar::Error);
}

}  // namespace
