#include <cmath>
#include <limits>

#include <Eigen/Dense>
#include <gtest/gtest.h>

#include "aldsurv/distributions.hpp"
#include "aldsurv/metrics.hpp"
#include "oracles.hpp"

using namespace aldsurv;

namespace {

struct ConstCdf {
  double value;
  double cdf(double) const { return value; }
  double quantile(double) const { return 0.0; }
};

// Step CDF of a sharp prediction at a known time.
struct SharpCdf {
  double at;
  double cdf(double t) const { return t >= at ? 1.0 : 0.0; }
  double quantile(double) const { return at; }
};

struct AldCdf {
  AldParams p;
  double cdf(double t) const { return ald_cdf(t, p); }
  double quantile(double q) const { return ald_quantile(q, p); }
};

std::vector<SurvivalRecord> records(std::vector<double> y, std::vector<bool> e) {
  std::vector<SurvivalRecord> out;
  for (std::size_t i = 0; i < y.size(); ++i) out.push_back({{0.0}, y[i], e[i], std::nullopt});
  return out;
}

double brute_brier(double t, const std::vector<SurvivalRecord>& test, const std::vector<double>& f_at_t,
                   const std::vector<double>& y_train, const std::vector<bool>& e_train) {
  std::vector<bool> cens(e_train.size());
  for (std::size_t i = 0; i < e_train.size(); ++i) cens[i] = !e_train[i];
  // G(t) = G just after t, i.e. before the next representable value.
  const double g_t = oracle::km_before(y_train, cens, std::nextafter(t, std::numeric_limits<double>::infinity()));
  double sum = 0;
  for (std::size_t i = 0; i < test.size(); ++i) {
    if (test[i].y <= t && test[i].event)
      sum += (1 - f_at_t[i]) * (1 - f_at_t[i]) / oracle::km_before(y_train, cens, test[i].y);
    else if (test[i].y > t)
      sum += f_at_t[i] * f_at_t[i] / g_t;
  }
  return sum / test.size();
}

}  // namespace

TEST(Mae, Examples) {
  auto recs = records({2, 2}, {true, true});
  recs[0].o_true = 2;
  recs[1].o_true = 2;
  EXPECT_DOUBLE_EQ(mae(std::vector<double>{2, 2}, recs, true), 0.0);
  EXPECT_DOUBLE_EQ(mae(std::vector<double>{1, 3}, recs, true), 1.0);
  const auto censored = records({1, 2}, {false, false});
  EXPECT_THROW(mae(std::vector<double>{1, 2}, censored, false), std::invalid_argument);
  // Real mode ignores censored records.
  EXPECT_DOUBLE_EQ(mae(std::vector<double>{5, 0}, records({4, 9}, {true, false}), false), 1.0);
}

TEST(KaplanMeier, HandCases) {
  const auto all_events = kaplan_meier(std::vector<double>{1, 2, 3}, {true, true, true});
  EXPECT_NEAR(all_events.at(1), 2.0 / 3, 1e-15);
  EXPECT_NEAR(all_events.at(2), 1.0 / 3, 1e-15);
  EXPECT_NEAR(all_events.at(3), 0.0, 1e-15);
  EXPECT_EQ(all_events.at(0.5), 1.0);
  EXPECT_NEAR(all_events.left_limit(2), 2.0 / 3, 1e-15);

  const auto none = kaplan_meier(std::vector<double>{1, 2, 3}, {false, false, false});
  for (double t : {0.0, 1.0, 2.5, 10.0}) EXPECT_EQ(none.at(t), 1.0);

  const auto mixed = kaplan_meier(std::vector<double>{1, 2}, {true, false});
  EXPECT_DOUBLE_EQ(mixed.at(1), 0.5);
  EXPECT_DOUBLE_EQ(mixed.at(2), 0.5);
  EXPECT_DOUBLE_EQ(mixed.at(100), 0.5);

  // Ties: two deaths at 2 among 4 at risk, a censoring at 2 leaves the risk set after.
  const auto ties = kaplan_meier(std::vector<double>{1, 2, 2, 2, 5}, {true, true, true, false, true});
  EXPECT_DOUBLE_EQ(ties.at(1), 0.8);
  EXPECT_DOUBLE_EQ(ties.at(2), 0.8 * 0.5);
  EXPECT_DOUBLE_EQ(ties.at(5), 0.0);
}

TEST(KaplanMeier, MatchesDefinitionOnRandomData) {
  Rng rng(1);
  for (int rep = 0; rep < 50; ++rep) {
    std::vector<double> y;
    std::vector<bool> e;
    for (int i = 0; i < 30; ++i) {
      y.push_back(std::floor(rng.uniform(0, 10)));  // force ties
      e.push_back(rng.bernoulli(0.6));
    }
    const auto km = kaplan_meier(y, e);
    for (double t = -0.5; t < 11; t += 0.5) EXPECT_NEAR(km.at(t), oracle::km_before(y, e, std::nextafter(t, 1e9)), 1e-12);
  }
}

TEST(Brier, SharpOracleIsZero) {
  std::vector<SurvivalRecord> test;
  std::vector<SharpCdf> adapters;
  for (double y : {1.0, 2.0, 3.5, 4.0}) {
    test.push_back({{0}, y, true, y});
    adapters.push_back({y});
  }
  const auto g = censoring_curve(test);
  for (double t : {0.5, 1.0, 2.5, 5.0}) EXPECT_EQ(brier_score<SharpCdf>(t, test, adapters, g), 0.0);
}

TEST(Brier, ConstantHalfIsQuarter) {
  const auto test = records({1, 2, 3, 4}, {true, true, true, true});
  const std::vector<ConstCdf> half(4, {0.5});
  const auto g = censoring_curve(test);
  for (double t : {0.5, 2.5, 10.0}) EXPECT_DOUBLE_EQ(brier_score<ConstCdf>(t, test, half, g), 0.25);
}

TEST(Brier, ThreeRecordHandCase) {
  // G drops to 0.5 at time 2. Record 1 died before t: (1 - 0.8)^2 / G(1-) = 0.04.
  // Record 2 was censored before t: no term. Record 3 is alive at t: 0.4^2 / G(2.5) = 0.32.
  const auto test = records({1, 2, 3}, {true, false, true});
  const std::vector<ConstCdf> f{{0.8}, {0.3}, {0.4}};
  const StepSurvivalCurve g{{2.0}, {0.5}};
  EXPECT_NEAR(brier_score<ConstCdf>(2.5, test, f, g), (0.04 + 0.32) / 3, 1e-15);
}

TEST(Brier, SkipsZeroWeightRecords) {
  const auto test = records({1, 3}, {true, true});
  const std::vector<ConstCdf> f{{0.5}, {0.5}};
  const StepSurvivalCurve g{{2.0}, {0.0}};
  const auto r = brier_score_detailed<ConstCdf>(2.5, test, f, g);
  EXPECT_EQ(r.skipped, 1u);
  EXPECT_DOUBLE_EQ(r.value, 0.25 / 2);
}

TEST(Ibs, ConstantHalfIsQuarter) {
  const auto train = records({1, 2, 3, 4, 5}, {true, true, true, true, true});
  const auto test = records({10, 11, 12}, {true, true, true});
  const std::vector<ConstCdf> half(3, {0.5});
  EXPECT_NEAR(ibs<ConstCdf>(test, half, censoring_curve(train), std::vector<double>{1, 2, 3, 4, 5}), 0.25, 1e-12);
}

TEST(Ibs, SharpOracleIsZero) {
  std::vector<SurvivalRecord> test;
  std::vector<SharpCdf> adapters;
  for (int i = 1; i <= 20; ++i) {
    test.push_back({{0}, i * 0.5, true, i * 0.5});
    adapters.push_back({i * 0.5});
  }
  std::vector<double> train_times{1, 2, 3, 4, 5, 6, 7, 8};
  EXPECT_EQ(ibs<SharpCdf>(test, adapters, censoring_curve(test), train_times), 0.0);
}

TEST(Ibs, MatchesFineGridIntegration) {
  Rng rng(3);
  std::vector<SurvivalRecord> train, test;
  std::vector<AldCdf> adapters;
  for (int i = 0; i < 200; ++i) {
    const double x = rng.uniform(0, 2);
    const double o = 5 + 2 * x + rng.normal();
    const double c = rng.uniform(3, 14);
    train.push_back({{x}, std::min(o, c), o <= c, o});
  }
  for (int i = 0; i < 60; ++i) {
    const double x = rng.uniform(0, 2);
    const double o = 5 + 2 * x + rng.normal();
    const double c = rng.uniform(3, 14);
    test.push_back({{x}, std::min(o, c), o <= c, o});
    adapters.push_back({AldParams(5 + 2 * x, 1.0, 1.0)});
  }
  std::vector<double> y_train;
  std::vector<bool> e_train;
  for (const auto& r : train) {
    y_train.push_back(r.y);
    e_train.push_back(r.event);
  }
  const double value = ibs<AldCdf>(test, adapters, censoring_curve(train), y_train);

  std::vector<double> sorted = y_train;
  std::sort(sorted.begin(), sorted.end());
  auto q7 = [&](double p) {
    const double h = p * (sorted.size() - 1);
    const auto lo = static_cast<std::size_t>(h);
    return sorted[lo] + (h - lo) * (sorted[std::min(lo + 1, sorted.size() - 1)] - sorted[lo]);
  };
  const double lo = q7(0.1), hi = q7(0.9);
  const int n = 10'000;
  double area = 0;
  for (int k = 0; k < n; ++k) {
    const double t = lo + (hi - lo) * (k + 0.5) / n;  // midpoint rule
    std::vector<double> f;
    for (const auto& a : adapters) f.push_back(a.cdf(t));
    area += brute_brier(t, test, f, y_train, e_train);
  }
  EXPECT_NEAR(value, area / n, 1e-3);
}

TEST(HarrellsC, Examples) {
  const std::vector<double> y{1, 2, 3, 4};
  const std::vector<bool> e{true, true, true, true};
  EXPECT_DOUBLE_EQ(harrells_c(std::vector<double>{4, 3, 2, 1}, y, e), 1.0);
  EXPECT_DOUBLE_EQ(harrells_c(std::vector<double>{1, 2, 3, 4}, y, e), 0.0);
  EXPECT_DOUBLE_EQ(harrells_c(std::vector<double>{7, 7, 7, 7}, y, e), 0.5);
}

TEST(HarrellsC, FourRecordMixedCensoring) {
  // Comparable pairs (shorter time must be an event): (1,2) (1,3) (1,4) (3,4);
  // record 2 is censored so it only appears as the longer member.
  const std::vector<double> y{1, 2, 3, 4}, risk{0.9, 0.1, 0.5, 0.6};
  const std::vector<bool> e{true, false, true, false};
  // (1,2) conc, (1,3) conc, (1,4) conc, (3,4) disc.
  EXPECT_DOUBLE_EQ(harrells_c(risk, y, e), 3.0 / 4);
  EXPECT_DOUBLE_EQ(harrells_c(risk, y, e), oracle::concordance(risk, y, e, nullptr, 1e300));
}

TEST(HarrellsC, BruteForceOnRandomInstances) {
  Rng rng(4);
  int done = 0;
  while (done < 100) {
    const std::size_t n = 2 + rng.index(7);
    std::vector<double> y(n), risk(n);
    std::vector<bool> e(n);
    for (std::size_t i = 0; i < n; ++i) {
      y[i] = std::floor(rng.uniform(0, 5));
      risk[i] = std::floor(rng.uniform(0, 4));
      e[i] = rng.bernoulli(0.6);
    }
    const double ref = oracle::concordance(risk, y, e, nullptr, 1e300);
    if (!std::isfinite(ref)) {
      EXPECT_THROW(harrells_c(risk, y, e), std::invalid_argument);
      continue;
    }
    EXPECT_NEAR(harrells_c(risk, y, e), ref, 1e-12);
    ++done;
  }
}

TEST(UnosC, EqualsHarrellWithoutCensoring) {
  const std::vector<double> y{1, 2, 3, 4, 5, 6}, risk{3, 5, 1, 2, 0.5, 0.1};
  const std::vector<bool> e(6, true);
  const auto g = kaplan_meier(y, std::vector<bool>(6, false));
  EXPECT_DOUBLE_EQ(unos_c(g, risk, y, e, 6.0), harrells_c(risk, y, e));
  EXPECT_DOUBLE_EQ(unos_c(g, std::vector<double>(6, 1.0), y, e), 0.5);
}

TEST(UnosC, FiveRecordWeightedCase) {
  const std::vector<double> y{1, 2, 3, 4, 5}, risk{0.2, 0.9, 0.4, 0.3, 0.1};
  const std::vector<bool> e{true, false, true, true, false};
  std::vector<bool> cens(5);
  for (int i = 0; i < 5; ++i) cens[i] = !e[i];
  const auto g = kaplan_meier(y, cens);
  // G(t-) at the event times: 1 at 1, 1 - 1/4 = 0.75 at 3 and 4.
  // tau = 4 excludes record 4 as the shorter member. Pairs: (1,j) j=2..5 weight 1,
  // (3,4) (3,5) weight 1/0.5625. Concordant: (1,5) only from record 1, and (3,4) (3,5).
  const double w = 1 / 0.5625;
  const double expected = (1 + 2 * w) / (4 + 2 * w);
  EXPECT_NEAR(unos_c(g, risk, y, e), expected, 1e-12);
  std::vector<double> gb;
  for (double t : y) gb.push_back(oracle::km_before(y, cens, t));
  EXPECT_NEAR(unos_c(g, risk, y, e), oracle::concordance(risk, y, e, &gb, 4.0), 1e-12);
}

TEST(UnosC, BruteForceOnRandomInstances) {
  Rng rng(5);
  int done = 0;
  while (done < 100) {
    const std::size_t n = 2 + rng.index(7);
    std::vector<double> y(n), risk(n), train_y;
    std::vector<bool> e(n), train_cens;
    for (std::size_t i = 0; i < n; ++i) {
      y[i] = std::floor(rng.uniform(0, 6));
      risk[i] = std::floor(rng.uniform(0, 4));
      e[i] = rng.bernoulli(0.6);
    }
    for (int i = 0; i < 8; ++i) {
      train_y.push_back(std::floor(rng.uniform(0, 6)));
      train_cens.push_back(rng.bernoulli(0.3));
    }
    const auto g = kaplan_meier(train_y, train_cens);
    std::vector<double> gb;
    for (double t : y) gb.push_back(oracle::km_before(train_y, train_cens, t));
    const double tau = rng.uniform(1, 6);
    const double ref = oracle::concordance(risk, y, e, &gb, tau);
    if (!std::isfinite(ref)) continue;
    EXPECT_NEAR(unos_c(g, risk, y, e, tau), ref, 1e-12);
    ++done;
  }
}

TEST(CensDcal, OracleCalibratedModelIsNearZero) {
  Rng rng(6);
  std::vector<SurvivalRecord> test;
  std::vector<AldCdf> adapters;
  for (int i = 0; i < 10'000; ++i) {
    const AldParams p(rng.uniform(5, 10), rng.uniform(0.5, 2), rng.uniform(0.5, 2));
    const double o = ald_quantile(rng.uniform(), p);
    const double c = rng.uniform(2, 16);
    test.push_back({{0}, std::min(o, c), o <= c, o});
    adapters.push_back({p});
  }
  EXPECT_LE(cens_dcal<AldCdf>(test, adapters), 0.1);
}

TEST(CensDcal, AllMassInOneDecile) {
  const auto test = records({1, 2, 3, 4}, {true, true, true, true});
  const std::vector<double> pit{0.01, 0.05, 0.07, 0.09};
  EXPECT_NEAR(cens_dcal_from_pit(pit, test), 90.0, 1e-10);
}

TEST(CensDcal, ThreeRecordHandCase) {
  // Events at PIT 0.05 and 0.55; a censored record at 0.6 spreads 1/4 of its
  // mass over each of the top four deciles. Deciles 2-5 stay empty.
  const auto test = records({1, 2, 3}, {true, true, false});
  const std::vector<double> pit{0.05, 0.55, 0.6};
  const double third = 1.0 / 3, twelfth = 1.0 / 12;
  const double expected = 100 * (2 * std::pow(0.1 - third, 2) + 4 * std::pow(0.1 - twelfth, 2) + 4 * 0.01);
  EXPECT_NEAR(cens_dcal_from_pit(pit, test), expected, 1e-10);
}

TEST(Calibration, OracleModelOnDiagonal) {
  Rng rng(7);
  std::vector<SurvivalRecord> test;
  std::vector<AldCdf> adapters;
  for (int i = 0; i < 10'000; ++i) {
    const AldParams p(rng.uniform(0, 5), rng.uniform(0.5, 2), rng.uniform(0.5, 2));
    const double o = ald_quantile(rng.uniform(), p);
    test.push_back({{0}, o, true, o});
    adapters.push_back({p});
  }
  for (auto v : {CalibrationVersion::survival, CalibrationVersion::density})
    for (const auto& pt : calibration_curve<AldCdf>(test, adapters, v))
      EXPECT_NEAR(pt.observed, pt.target, 0.02);
}

TEST(Calibration, PointMassBelowAllTimes) {
  const auto test = records({1, 2, 3}, {true, true, true});
  const std::vector<ConstCdf> f(3, {1.0});
  const auto curve = calibration_curve<ConstCdf>(test, f, CalibrationVersion::survival);
  for (int j = 0; j < 9; ++j) EXPECT_EQ(curve[j].observed, 0.0);
  EXPECT_EQ(curve[9].observed, 1.0);
}

TEST(Calibration, FourRecordHandCount) {
  const auto test = records({1, 2, 3, 4}, {true, true, true, true});
  const std::vector<double> pit{0.04, 0.14, 0.33, 0.97};
  const auto s = calibration_from_pit(pit, test, CalibrationVersion::survival);
  const double surv[10] = {0.25, 0.5, 0.5, 0.75, 0.75, 0.75, 0.75, 0.75, 0.75, 1.0};
  // Distances from 0.5: 0.46, 0.36, 0.17, 0.47.
  const double dens[10] = {0, 0, 0, 0.25, 0.25, 0.25, 0.25, 0.5, 0.5, 1.0};
  const auto d = calibration_from_pit(pit, test, CalibrationVersion::density);
  for (int j = 0; j < 10; ++j) {
    EXPECT_NEAR(s[j].target, 0.1 * (j + 1), 1e-15);
    EXPECT_DOUBLE_EQ(s[j].observed, surv[j]) << j;
    EXPECT_DOUBLE_EQ(d[j].observed, dens[j]) << j;
  }
}

TEST(OlsFit, AnalyticLines) {
  std::vector<CalibrationPoint> identity, line;
  for (int j = 1; j <= 10; ++j) {
    identity.push_back({0.1 * j, 0.1 * j});
    line.push_back({0.1 * j, 2 * 0.1 * j + 1});
  }
  auto a = ols_fit(identity);
  EXPECT_NEAR(a.slope, 1.0, 1e-12);
  EXPECT_NEAR(a.intercept, 0.0, 1e-12);
  auto b = ols_fit(line);
  EXPECT_NEAR(b.slope, 2.0, 1e-12);
  EXPECT_NEAR(b.intercept, 1.0, 1e-12);
}

TEST(OlsFit, MatchesNormalEquations) {
  Rng rng(8);
  for (int rep = 0; rep < 20; ++rep) {
    std::vector<CalibrationPoint> pts;
    Eigen::MatrixXd X(12, 2);
    Eigen::VectorXd Y(12);
    for (int i = 0; i < 12; ++i) {
      pts.push_back({rng.uniform(-2, 2), rng.uniform(-2, 2)});
      X(i, 0) = 1.0;
      X(i, 1) = pts.back().target;
      Y(i) = pts.back().observed;
    }
    const Eigen::Vector2d beta = (X.transpose() * X).ldlt().solve(X.transpose() * Y);
    const auto fit = ols_fit(pts);
    EXPECT_NEAR(fit.intercept, beta(0), 1e-10);
    EXPECT_NEAR(fit.slope, beta(1), 1e-10);
  }
}

TEST(EvaluateMetrics, SharpOracleOnSyntheticRecords) {
  std::vector<SurvivalRecord> train, test;
  std::vector<SharpCdf> adapters;
  std::vector<double> points;
  for (int i = 1; i <= 40; ++i) {
    train.push_back({{0}, double(i), i % 3 != 0, double(i)});
    test.push_back({{0}, i + 0.25, true, i + 0.25});
    adapters.push_back({i + 0.25});
    points.push_back(i + 0.25);
  }
  EvaluationDiagnostics diag;
  const auto m = evaluate_metrics<SharpCdf>(train, test, adapters, points, true, 2.0, &diag);
  EXPECT_EQ(m.mae, 0.0);
  EXPECT_EQ(m.ibs, 0.0);
  EXPECT_EQ(m.harrell_c, 1.0);
  EXPECT_EQ(m.uno_c, 1.0);
  EXPECT_DOUBLE_EQ(diag.uno_tau, 40.25);
  EXPECT_EQ(MetricReport::from_values(m.values()), m);
}
