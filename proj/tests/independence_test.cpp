#include <algorithm>
#include <numeric>

#include <gtest/gtest.h>

#include "repfair/independence.hpp"
#include "repfair/stats_metrics.hpp"
#include "support/example1.hpp"
#include "support/synthetic.hpp"

namespace repfair {
namespace {

using testing::example1;

ReputationVector engine_reputations(const RatingsMatrix& R) {
  return compute(R, EngineConfig::fixed_iterations(8, 0.5)).reputations;
}

double group_mean(const ReputationVector& c, const std::vector<UserIndex>& users) {
  double s = 0.0;
  for (UserIndex u : users) s += c[u];
  return s / static_cast<double>(users.size());
}

TEST(GroupStats, Example1Gender) {
  const auto ex = example1();
  const ReputationVector c = engine_reputations(ex.ratings);
  const GroupStats st = group_stats(c, build_partition(ex.schema, ex.profiles, {"Gender"}));
  ASSERT_EQ(st.groups.size(), 2u);
  EXPECT_NEAR(st.groups[0].mean, 0.9405, 5e-5);
  EXPECT_NEAR(st.groups[1].mean, 0.8840, 5e-5);
  EXPECT_DOUBLE_EQ(st.target_mean, st.groups[1].mean);
  EXPECT_DOUBLE_EQ(st.target_std, std::min(st.groups[0].std, st.groups[1].std));
}

TEST(GroupStats, Example1GenderAge) {
  const auto ex = example1();
  const ReputationVector c = engine_reputations(ex.ratings);
  const GroupStats st = group_stats(c, build_partition(ex.schema, ex.profiles, {"Gender", "Age"}));
  ASSERT_EQ(st.groups.size(), 3u);
  EXPECT_NEAR(st.groups[0].mean, 0.93575, 5e-5);
  EXPECT_NEAR(st.groups[1].mean, 0.94530, 5e-5);
  EXPECT_NEAR(st.groups[2].mean, 0.88400, 5e-5);
  EXPECT_NEAR(st.target_mean, 0.8840, 5e-5);
}

TEST(SingleFair, GenderGolden) {
  const auto ex = example1();
  const ReputationVector c = engine_reputations(ex.ratings);
  const FairResult f = single_fair(ex.ratings, c, ex.schema, ex.profiles, "Gender");
  for (UserIndex u = 0; u < 6; ++u)
    EXPECT_NEAR(f.reputations[u], testing::kGenderFairReputations[u], 5e-5) << "user " << u;
  for (ItemIndex i = 0; i < 5; ++i)
    EXPECT_NEAR(f.rankings[i], testing::kGenderFairRankings[i], 5e-5) << "item " << i;
}

TEST(SingleFair, PopulationStdMissesGolden) {
  const auto ex = example1();
  const ReputationVector c = engine_reputations(ex.ratings);
  RecenterOptions opts;
  opts.divisor = StdDivisor::population;
  const FairResult f = single_fair(ex.ratings, c, ex.schema, ex.profiles, "Gender", opts);
  EXPECT_GT(std::abs(f.reputations[4] - testing::kGenderFairReputations[4]), 1e-3);
}

TEST(SingleFair, GenderLeavesAgeResidual) {
  const auto ex = example1();
  const ReputationVector c = engine_reputations(ex.ratings);
  const FairResult f = single_fair(ex.ratings, c, ex.schema, ex.profiles, "Gender");
  const GroupPartition age = build_partition(ex.schema, ex.profiles, {"Age"});
  const double dr = disparate_reputation(f.reputations, age.groups.at({0}), age.groups.at({1}));
  EXPECT_NEAR(dr, -0.0072, 5e-4);
  const GroupPartition gender = build_partition(ex.schema, ex.profiles, {"Gender"});
  EXPECT_LE(std::abs(disparate_reputation(f.reputations, gender.groups.at({0}),
                                          gender.groups.at({1}))),
            1e-6);
}

TEST(MultiFair, Example1AllMarginalsEqual) {
  const auto ex = example1();
  const ReputationVector c = engine_reputations(ex.ratings);
  const FairResult f = multi_fair(ex.ratings, c, ex.schema, ex.profiles, {"Gender", "Age"});
  for (const char* attr : {"Gender", "Age"}) {
    for (const auto& m : class_means(f.reputations, ex.schema, ex.profiles, ex.schema.index_of(attr))) {
      ASSERT_TRUE(m.has_value());
      EXPECT_NEAR(*m, 0.8840, 1e-4);
    }
  }
  EXPECT_LE(max_marginal_dr(f.reputations, ex.schema, ex.profiles, {"Gender", "Age"}), 1e-10);
}

TEST(Recenter, SingleGroupIsIdentity) {
  Rng rng(3);
  const auto s = testing::random_instance(rng, 30, 10, {1});
  const ReputationVector c = engine_reputations(s.ratings);
  const ReputationVector out = recenter(c, build_partition(s.schema, s.profiles, {"A0"}));
  for (UserIndex u = 0; u < 30; ++u) EXPECT_NEAR(out[u], c[u], 1e-14);
}

TEST(Recenter, KEqualsOneMatchesSingle) {
  Rng rng(5);
  const auto s = testing::random_instance(rng, 40, 15, {3, 2});
  const ReputationVector c = engine_reputations(s.ratings);
  const FairResult a = multi_fair(s.ratings, c, s.schema, s.profiles, {"A1"});
  const FairResult b = single_fair(s.ratings, c, s.schema, s.profiles, "A1");
  EXPECT_EQ(a.reputations.values, b.reputations.values);
  EXPECT_EQ(a.rankings.values, b.rankings.values);
}

TEST(Recenter, ZeroSpreadGroupMapsToTarget) {
  const AttributeSchema schema({{"g", {"x", "y", "z"}}});
  UserProfiles prof(1, 6);
  const ClassIndex cls[] = {0, 0, 0, 1, 1, 2};
  for (UserIndex u = 0; u < 6; ++u) prof.set(u, 0, cls[u]);
  ReputationVector c(6);
  c.values = {0.9, 0.8, 0.7, 0.6, 0.6, 0.95};
  RecenterLog log;
  const GroupPartition p = build_partition(schema, prof, {"g"});
  const ReputationVector out = recenter(c, p, {}, &log);
  const GroupStats st = group_stats(c, p);
  EXPECT_DOUBLE_EQ(st.target_mean, 0.6);
  EXPECT_DOUBLE_EQ(st.target_std, 0.1);
  EXPECT_DOUBLE_EQ(out[3], 0.6);
  EXPECT_DOUBLE_EQ(out[4], 0.6);
  EXPECT_DOUBLE_EQ(out[5], 0.6);
  EXPECT_NEAR(out[0], 0.7, 1e-15);
  ASSERT_EQ(log.zero_spread_groups.size(), 1u);
  EXPECT_EQ(log.zero_spread_groups[0], (GroupKey{1}));
}

TEST(Recenter, UsersOutsidePartitionPassThrough) {
  const AttributeSchema schema({{"g", {"x", "y"}}});
  UserProfiles prof(1, 5);
  prof.set(0, 0, 0);
  prof.set(1, 0, 0);
  prof.set(2, 0, 1);
  prof.set(3, 0, 1);
  ReputationVector c(5);
  c.values = {0.9, 0.7, 0.8, 0.6, 0.55};
  RecenterLog log;
  const ReputationVector out = recenter(c, build_partition(schema, prof, {"g"}), {}, &log);
  EXPECT_DOUBLE_EQ(out[4], 0.55);
  EXPECT_EQ(log.passthrough_users, 1u);
}

TEST(SequentialFair, LastAttributeIsExact) {
  Rng rng(17);
  const auto s = testing::correlated_instance(rng);
  const ReputationVector c = engine_reputations(s.ratings);
  const FairResult f = sequential_fair(s.ratings, c, s.schema, s.profiles, {"A0", "A1"});
  EXPECT_LE(max_marginal_dr(f.reputations, s.schema, s.profiles, {"A1"}), 1e-12);
  EXPECT_THROW(sequential_fair(s.ratings, c, s.schema, s.profiles, {}), InputError);
}

class RecenterProperties : public ::testing::TestWithParam<int> {};

TEST_P(RecenterProperties, MarginalIndependenceOrderAndIdempotence) {
  Rng rng(500 + GetParam());
  const std::size_t k = 1 + rng.below(3);
  std::vector<std::size_t> classes(k);
  for (auto& x : classes) x = 2 + rng.below(3);
  const auto s = testing::random_instance(rng, 20 + rng.below(120), 10 + rng.below(30), classes);
  EngineConfig cfg;
  cfg.lambda = 0.05 + 0.9 * rng.unit();
  const ReputationVector c = compute(s.ratings, cfg).reputations;
  std::vector<std::string> attrs;
  for (std::size_t a = 0; a < k; ++a) attrs.push_back(s.schema[a].name);

  const GroupPartition p = build_partition(s.schema, s.profiles, attrs);
  const ReputationVector out = recenter(c, p);
  const GroupStats st = group_stats(c, p);

  for (UserIndex u = 0; u < out.size(); ++u) {
    EXPECT_GT(out[u], 0.0);
    EXPECT_LE(out[u], 1.0);
  }
  for (const auto& [key, users] : p.groups) {
    EXPECT_NEAR(group_mean(out, users), st.target_mean, 1e-12);
    // Within a group the order of reputations is kept.
    for (UserIndex a : users)
      for (UserIndex b : users)
        if (c[a] < c[b]) {
          EXPECT_LE(out[a], out[b]);
        }
  }
  EXPECT_LE(max_marginal_dr(out, s.schema, s.profiles, attrs), 1e-10);

  const ReputationVector twice = recenter(out, p);
  for (UserIndex u = 0; u < out.size(); ++u) EXPECT_NEAR(twice[u], out[u], 1e-12);
}

INSTANTIATE_TEST_SUITE_P(Random, RecenterProperties, ::testing::Range(0, 50));

}  // namespace
}  // namespace repfair
