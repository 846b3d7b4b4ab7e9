#include <gtest/gtest.h>

#include <sstream>

#include "iar/dataprep.hpp"

namespace {

using iar::ErrorKind;
using iar::Quarter;

iar::ObservationFrame read(const std::string& text, const iar::Schema& schema = iar::fred_schema()) {
  std::istringstream in(text);
  return iar::read_frame(in, schema);
}

ErrorKind kind_of(const std::string& text) {
  try {
    read(text);
  } catch (const iar::Error& e) {
    return e.kind();
  }
  return ErrorKind::internal;
}

const char* kHeader = "DATE,CPIAUCSL_PC1,A191RL1Q225SBEA,B021RG3Q086SBEA_PC1,NFCI\n";

iar::ObservationFrame linear_frame(std::size_t T, double slope) {
  iar::ObservationFrame f;
  for (std::size_t t = 0; t < T; ++t) {
    f.dates.push_back(Quarter(2000, 1) + static_cast<int>(t));
    f.columns["inflation"].push_back(slope * static_cast<double>(t));
    f.columns["gdp"].push_back(1.0 + static_cast<double>(t % 3));
    f.columns["import"].push_back(0.5 * static_cast<double>(t % 5));
    f.columns["nfci"].push_back(-0.1 * static_cast<double>(t % 7));
  }
  return f;
}

TEST(Quarter, ParsesLabelsAndMonthStartDates) {
  EXPECT_EQ(Quarter::parse("1973Q1"), Quarter(1973, 1));
  EXPECT_EQ(Quarter::parse("1973-Q4"), Quarter(1973, 4));
  EXPECT_EQ(Quarter::parse("2022-10-01"), Quarter(2022, 4));
  EXPECT_EQ(Quarter::parse("2022-07-01"), Quarter(2022, 3));
  EXPECT_FALSE(Quarter::parse("2022-02-01"));
  EXPECT_FALSE(Quarter::parse("2022-01-15"));
  EXPECT_FALSE(Quarter::parse("1973Q5"));
  EXPECT_FALSE(Quarter::parse("garbage"));
}

TEST(Quarter, OrdinalArithmetic) {
  EXPECT_EQ(Quarter(1973, 4) + 1, Quarter(1974, 1));
  EXPECT_EQ((Quarter(1973, 1) + 199).str(), "2022Q4");
  EXPECT_EQ(Quarter::from_ordinal(Quarter(1999, 3).ordinal()), Quarter(1999, 3));
}

TEST(LoadCsv, FourRowsRenamedToRoles) {
  const auto f = read(std::string(kHeader) +
                      "1973-01-01,3.6,10.0,5.0,0.1\n1973-04-01,4.0,4.5,6.0,0.2\n"
                      "1973-07-01,5.0,-2.0,9.0,0.3\n1973-10-01,6.5,3.8,12.0,0.4\n");
  ASSERT_EQ(f.size(), 4u);
  EXPECT_EQ(f.column("inflation")[3], 6.5);
  EXPECT_EQ(f.column("nfci")[0], 0.1);
  EXPECT_EQ(f.dates.front(), Quarter(1973, 1));
  EXPECT_EQ(f.columns.size(), 4u);
}

TEST(LoadCsv, MissingColumnNamesIt) {
  try {
    read("DATE,CPIAUCSL_PC1,A191RL1Q225SBEA,B021RG3Q086SBEA_PC1\n1973Q1,1,2,3\n");
    FAIL();
  } catch (const iar::Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::schema);
    EXPECT_NE(std::string(e.what()).find("NFCI"), std::string::npos);
  }
}

TEST(LoadCsv, RejectsGapsBadCellsAndInteriorMissing) {
  EXPECT_EQ(kind_of(std::string(kHeader) + "1973Q1,1,2,3,4\n1973Q3,1,2,3,4\n"), ErrorKind::frequency);
  EXPECT_EQ(kind_of(std::string(kHeader) + "1973Q1,1,2,3,4\n1973Q1,1,2,3,4\n"), ErrorKind::frequency);
  EXPECT_EQ(kind_of(std::string(kHeader) + "1973Q1,1,2,3,4\nnot-a-date,1,2,3,4\n"), ErrorKind::parse);
  EXPECT_EQ(kind_of(std::string(kHeader) + "1973Q1,1,2,3,4\n1973Q2,1,2,3,4\n1973Q3,1,2,3,4\n"
                                           "1973Q4,1,2,x,4\n"),
            ErrorKind::parse);
  EXPECT_EQ(kind_of(std::string(kHeader) + "1973Q1,1,2,3,4\n1973Q2,.,2,3,4\n1973Q3,1,2,3,4\n"), ErrorKind::parse);
  try {
    read(std::string(kHeader) + "1973Q1,1,2,3,4\n1973Q2,1,2,3,4\n1973Q3,1,2,bad,4\n");
    FAIL();
  } catch (const iar::Error& e) {
    EXPECT_NE(std::string(e.what()).find("row 4"), std::string::npos) << e.what();
  }
}

TEST(LoadCsv, EdgeMissingKept) {
  const auto f = read(std::string(kHeader) + "1973Q1,.,2,3,4\n1973Q2,1,2,3,4\n1973Q3,1,2,3,\n");
  EXPECT_TRUE(iar::is_missing(f.column("inflation")[0]));
  EXPECT_TRUE(iar::is_missing(f.column("nfci")[2]));
}

TEST(LoadCsv, FullSampleFixtureHas200Rows) {
  std::ostringstream csv;
  csv << kHeader;
  for (int i = 0; i < 200; ++i) {
    const Quarter q = Quarter(1973, 1) + i;
    csv << q.year() << '-' << (q.quarter() == 4 ? "" : "0") << 3 * q.quarter() - 2 << "-01," << 0.01 * i << ",2,3,"
        << -0.5 << '\n';
  }
  const auto f = read(csv.str());
  ASSERT_EQ(f.size(), 200u);
  EXPECT_EQ(f.dates.back(), Quarter(2022, 4));
}

TEST(LoadCsv, WriteReadRoundTripIsExact) {
  auto f = linear_frame(12, 0.1);
  f.columns["inflation"][0] = iar::kMissing;
  std::ostringstream out;
  iar::write_frame(out, f);
  const auto g = read(out.str(), iar::canonical_schema());
  EXPECT_EQ(g.dates, f.dates);
  for (const auto& r : iar::roles::all()) {
    for (std::size_t i = 0; i < f.size(); ++i) {
      if (iar::is_missing(f.column(r)[i])) {
        EXPECT_TRUE(iar::is_missing(g.column(r)[i]));
      } else {
        EXPECT_EQ(f.column(r)[i], g.column(r)[i]);
      }
    }
  }
}

TEST(Momentum, FirstDifference) {
  const auto z = iar::compute_momentum({2.0, 2.5, 3.0});
  EXPECT_TRUE(iar::is_missing(z[0]));
  EXPECT_EQ(z[1], 0.5);
  EXPECT_EQ(z[2], 0.5);
  const auto c = iar::compute_momentum({4.0, 4.0, 4.0, 4.0});
  for (std::size_t i = 1; i < c.size(); ++i) EXPECT_EQ(c[i], 0.0);
  EXPECT_THROW(iar::compute_momentum({1.0}), iar::Error);
}

TEST(Momentum, CumulativeSumReconstructs) {
  const std::vector<double> y{0.0, 1.0, 3.0, 2.0, 7.0, -1.0};
  const auto z = iar::compute_momentum(y);
  double acc = y[0];
  for (std::size_t t = 1; t < y.size(); ++t) {
    acc += z[t];
    EXPECT_EQ(acc, y[t]);
  }
}

TEST(BuildDesign, LengthSixLosesTwoRows) {
  const auto f = linear_frame(6, 1.0);
  const auto d = iar::build_design(f, 1, {iar::MomentumTiming::current, 4});
  ASSERT_EQ(d.rows(), 4);
  EXPECT_EQ(d.dropped, 2u);
  EXPECT_EQ(d.origin_dates.front(), Quarter(2000, 2));
  EXPECT_EQ(d.target[0], 2.0);
  EXPECT_EQ(d.covariates(0, 1), 1.0);
  EXPECT_EQ(d.momentum[0], 1.0);
  EXPECT_TRUE((d.covariates.col(0).array() == 1.0).all());
  EXPECT_THROW(iar::build_design(f, 1), iar::Error);
}

TEST(BuildDesign, FourQuarterMeanTargets) {
  auto f = linear_frame(20, 0.0);
  for (auto& v : f.columns["inflation"]) v = 1.0;
  const auto ones = iar::build_design(f, 4);
  EXPECT_TRUE((ones.target.array() == 1.0).all());

  for (std::size_t t = 0; t < f.size(); ++t) f.columns["inflation"][t] = t % 2 == 0 ? 0.0 : 4.0;
  const auto alt = iar::build_design(f, 4);
  EXPECT_TRUE((alt.target.array() == 2.0).all());
  EXPECT_EQ(alt.rows(), 20 - 1 - 4);
}

TEST(BuildDesign, TargetDatesLineUpWithHorizon) {
  auto f = linear_frame(30, 0.5);
  for (int h : {1, 4}) {
    const auto d = iar::build_design(f, h);
    for (iar::Index i = 0; i < d.rows(); ++i) {
      const auto t = static_cast<std::size_t>(d.origin_dates[static_cast<std::size_t>(i)].ordinal() -
                                              f.dates[0].ordinal());
      EXPECT_EQ(d.covariates(i, 1), f.column("inflation")[t]);
      // inflation is linear in t, so the h-quarter mean sits at t + (h + 1) / 2.
      EXPECT_DOUBLE_EQ(d.target[i], 0.5 * (static_cast<double>(t) + (h + 1) / 2.0));
    }
  }
}

TEST(BuildDesign, LaggedTimingShiftsMomentum) {
  auto f = linear_frame(15, 0.0);
  for (std::size_t t = 0; t < f.size(); ++t) f.columns["inflation"][t] = static_cast<double>(t * t);
  const auto cur = iar::build_design(f, 1);
  const auto lag = iar::build_design(f, 1, {iar::MomentumTiming::lagged, 10});
  EXPECT_EQ(cur.momentum[0], 1.0);  // t = 1: 1 - 0
  EXPECT_EQ(lag.origin_dates[0], Quarter(2000, 3));
  EXPECT_EQ(lag.momentum[0], 1.0);  // t = 2: y_1 - y_0
  EXPECT_EQ(cur.momentum[1], lag.momentum[0] + 2.0);
}

TEST(BuildDesign, Deterministic) {
  const auto f = linear_frame(40, 0.3);
  const auto a = iar::build_design(f, 4);
  const auto b = iar::build_design(f, 4);
  EXPECT_EQ(a.covariates, b.covariates);
  EXPECT_EQ(a.target, b.target);
  EXPECT_EQ(a.momentum, b.momentum);
}

TEST(BuildDesign, RejectsBadHorizonAndMissingColumn) {
  auto f = linear_frame(20, 1.0);
  EXPECT_THROW(iar::build_design(f, 2), iar::Error);
  f.columns.erase("nfci");
  EXPECT_THROW(iar::build_design(f, 1), iar::Error);
}

TEST(Grid, DefaultGridShapeAndBounds) {
  const auto g = iar::default_grid();
  ASSERT_EQ(g.size(), 21u);
  EXPECT_EQ(g[0], -2.0);
  EXPECT_EQ(g[20], 2.0);
  EXPECT_EQ(g[10], 0.0);
  EXPECT_EQ(g.bounds(10).first, -0.1);
  EXPECT_EQ(g.bounds(10).second, 0.1);
  EXPECT_TRUE(std::isinf(g.bounds(0).first));
  EXPECT_EQ(g.bounds(0).second, -1.9);
  EXPECT_TRUE(std::isinf(g.bounds(20).second));
}

TEST(Grid, NearestPointTiesLowAndClamps) {
  const auto g = iar::default_grid();
  EXPECT_EQ(g[g.nearest(0.09)], 0.0);
  EXPECT_EQ(g[g.nearest(0.1)], 0.0);
  EXPECT_EQ(g[g.nearest(0.11)], 0.2);
  EXPECT_EQ(g[g.nearest(3.7)], 2.0);
  EXPECT_EQ(g[g.nearest(-9.0)], -2.0);
  EXPECT_THROW(iar::ConditioningGrid({0.0, 0.0}), iar::Error);
}

}  // namespace
