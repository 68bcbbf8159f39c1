#include <cmath>

#include <gtest/gtest.h>

#include "repfair/reputation_engine.hpp"
#include "repfair/rng.hpp"
#include "repfair/stats_metrics.hpp"
#include "support/example1.hpp"
#include "support/oracles.hpp"

namespace repfair {
namespace {

double normal(Rng& rng) {
  // Box-Muller, one draw per call is enough here.
  const double u1 = 1.0 - rng.unit();
  const double u2 = rng.unit();
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
}

TEST(DisparateReputation, Example1Gender) {
  const auto ex = testing::example1();
  const ReputationVector c = compute(ex.ratings, EngineConfig::fixed_iterations(8, 0.5)).reputations;
  const GroupPartition p = build_partition(ex.schema, ex.profiles, {"Gender"});
  const double ab = disparate_reputation(c, p.groups.at({0}), p.groups.at({1}));
  const double ba = disparate_reputation(c, p.groups.at({1}), p.groups.at({0}));
  EXPECT_NEAR(ab, 0.0565, 1e-4);
  EXPECT_DOUBLE_EQ(ab, -ba);
}

TEST(DisparateReputation, EmptyGroupRejected) {
  ReputationVector c(2);
  const std::vector<UserIndex> a = {0}, none;
  EXPECT_THROW(disparate_reputation(c, a, none), InputError);
}

TEST(LocationTest, IdenticalSamplesDoNotReject) {
  const std::vector<double> x = {0.8, 0.9, 0.85, 0.7};
  const LTResult r = location_test(x, x);
  EXPECT_DOUBLE_EQ(r.statistic, 0.0);
  EXPECT_DOUBLE_EQ(r.p_value, 1.0);
  EXPECT_FALSE(r.reject);
}

TEST(LocationTest, ConstantSamples) {
  const std::vector<double> a = {0.5, 0.5}, b = {0.7, 0.7};
  EXPECT_DOUBLE_EQ(location_test(a, a).p_value, 1.0);
  const LTResult r = location_test(a, b);
  EXPECT_DOUBLE_EQ(r.p_value, 0.0);
  EXPECT_TRUE(std::isinf(r.statistic) && r.statistic < 0);
}

TEST(LocationTest, WellSeparatedSamplesReject) {
  Rng rng(9);
  std::vector<double> a, b;
  for (int k = 0; k < 1000; ++k) {
    a.push_back(0.5 + 0.05 * normal(rng));
    b.push_back(0.6 + 0.05 * normal(rng));
  }
  for (auto kind : {LocationTestKind::welch, LocationTestKind::pooled}) {
    const LTResult r = location_test(a, b, 0.05, kind);
    EXPECT_TRUE(r.reject);
    EXPECT_LT(r.p_value, 1e-10);
  }
}

TEST(LocationTest, KnownWelchValues) {
  // Hand computation: means 2 and 5, variances 1 and 2.5, n = 3 and 4.
  const std::vector<double> a = {1, 2, 3}, b = {3, 4, 6, 7};
  const LTResult r = location_test(a, b);
  const double qa = 1.0 / 3, qb = 10.0 / 3 / 4;
  EXPECT_NEAR(r.statistic, -3.0 / std::sqrt(qa + qb), 1e-12);
  EXPECT_NEAR(r.degrees_of_freedom,
              (qa + qb) * (qa + qb) / (qa * qa / 2 + qb * qb / 3), 1e-12);
  const LTResult pooled = location_test(a, b, 0.05, LocationTestKind::pooled);
  EXPECT_DOUBLE_EQ(pooled.degrees_of_freedom, 5.0);
}

TEST(LocationTest, ShiftInvariance) {
  Rng rng(21);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<double> a, b;
    for (int k = 0; k < 15; ++k) a.push_back(rng.unit());
    for (int k = 0; k < 9; ++k) b.push_back(rng.unit() + 0.1);
    const double shift = rng.unit() - 0.5;
    std::vector<double> as = a, bs = b;
    for (auto& x : as) x += shift;
    for (auto& x : bs) x += shift;
    EXPECT_NEAR(location_test(a, b).p_value, location_test(as, bs).p_value, 1e-9);
  }
}

TEST(LocationTest, TooFewValues) {
  const std::vector<double> one = {0.5}, two = {0.5, 0.6};
  EXPECT_THROW(location_test(one, two), InputError);
}

TEST(StudentT, PValueMatchesQuadrature) {
  Rng rng(33);
  for (int trial = 0; trial < 200; ++trial) {
    const double t = (rng.unit() - 0.5) * 12.0;
    const double df = 1.0 + 60.0 * rng.unit();
    EXPECT_NEAR(student_t_two_sided_p(t, df), testing::t_two_sided_p_by_quadrature(t, df), 1e-6)
        << "t=" << t << " df=" << df;
  }
  EXPECT_NEAR(student_t_two_sided_p(2.0, 10.0), 0.07338803, 1e-7);
}

TEST(DRMatrix, DeltasAndSingletonCell) {
  const AttributeSchema schema({{"g", {"x", "y", "z"}}});
  UserProfiles prof(1, 5);
  const ClassIndex cls[] = {0, 0, 1, 1, 2};
  for (UserIndex u = 0; u < 5; ++u) prof.set(u, 0, cls[u]);
  ReputationVector c(5);
  c.values = {0.9, 0.7, 0.6, 0.5, 0.4};
  const DRMatrix m = dr_matrix(c, build_partition(schema, prof, {"g"}), 0.05);
  ASSERT_EQ(m.cells.size(), 3u);
  EXPECT_NEAR(m.delta(0, 1), 0.25, 1e-15);
  EXPECT_NEAR(m.delta(1, 0), -0.25, 1e-15);
  EXPECT_NEAR(m.delta(0, 2), 0.4, 1e-15);
  const DRCell& single = m.cells[1];
  EXPECT_TRUE(std::isnan(single.test.statistic));
  EXPECT_DOUBLE_EQ(single.test.p_value, 1.0);
  EXPECT_FALSE(single.test.reject);
}

TEST(KendallTau, MatchesBruteForceExactly) {
  Rng rng(44);
  for (int trial = 0; trial < 500; ++trial) {
    const std::size_t n = 2 + rng.below(40);
    const std::size_t levels = 1 + rng.below(6);
    std::vector<double> x(n), y(n);
    for (std::size_t k = 0; k < n; ++k) {
      x[k] = static_cast<double>(rng.below(levels));
      y[k] = static_cast<double>(rng.below(levels + 2));
    }
    EXPECT_EQ(kendall_tau(x, y), testing::brute_force_tau_b(x, y));
  }
}

TEST(KendallTau, KnownValues) {
  const std::vector<double> a = {1, 2, 3}, b = {1, 3, 2}, c = {3, 2, 1};
  EXPECT_NEAR(kendall_tau(a, b), 1.0 / 3.0, 1e-15);
  const std::vector<double> x = {1, 2, 3, 4}, y = {1, 2, 4, 3};
  EXPECT_NEAR(kendall_tau(x, y), 0.6667, 1e-4);
  EXPECT_DOUBLE_EQ(kendall_tau(a, a), 1.0);
  EXPECT_DOUBLE_EQ(kendall_tau(a, c), -1.0);
}

TEST(KendallTau, InvariantUnderMonotoneTransform) {
  Rng rng(45);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<double> x(25), y(25), fx(25);
    for (std::size_t k = 0; k < 25; ++k) {
      x[k] = rng.unit();
      y[k] = rng.unit();
      fx[k] = std::exp(3.0 * x[k]) + 7.0;
    }
    EXPECT_DOUBLE_EQ(kendall_tau(x, y), kendall_tau(fx, y));
  }
}

TEST(KendallTau, RankingVectorsUseCommonItems) {
  RankingVector r1(4), r2(4);
  r1.values = {0.1, 0.2, 0.3, 0.9};
  r1.ranked = {1, 1, 1, 0};
  r2.values = {0.3, 0.5, 0.9, 0.0};
  r2.ranked = {1, 1, 1, 1};
  EXPECT_DOUBLE_EQ(kendall_tau(r1, r2), 1.0);
  r1.ranked = {1, 0, 0, 0};
  EXPECT_THROW(kendall_tau(r1, r2), InputError);
}

TEST(Rmse, KnownValues) {
  const std::vector<double> a = {0.2, 0.4, 0.6}, b = {0.0, 1.0}, c = {1.0, 0.0};
  EXPECT_DOUBLE_EQ(rmse(a, a), 0.0);
  EXPECT_DOUBLE_EQ(rmse(b, c), 1.0);
  const std::vector<double> x = {0.5, 0.5}, y = {0.5 + std::sqrt(0.2), 0.5};
  EXPECT_NEAR(rmse(x, y), std::sqrt(0.1), 1e-15);
}

TEST(FiveNumberSummary, LinearQuartiles) {
  const FiveNumberSummary s = five_number_summary({5, 1, 3, 2, 4});
  EXPECT_DOUBLE_EQ(s.min, 1);
  EXPECT_DOUBLE_EQ(s.q1, 2);
  EXPECT_DOUBLE_EQ(s.median, 3);
  EXPECT_DOUBLE_EQ(s.q3, 4);
  EXPECT_DOUBLE_EQ(s.max, 5);
}

}  // namespace
}  // namespace repfair
