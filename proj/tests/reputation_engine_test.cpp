#include <algorithm>
#include <numeric>

#include <gtest/gtest.h>

#include "repfair/reputation_engine.hpp"
#include "support/example1.hpp"
#include "support/synthetic.hpp"

namespace repfair {
namespace {

using testing::example1;
using testing::kGoldenRankings;
using testing::kGoldenReputations;

ReputationVector golden_reputations() {
  ReputationVector c(6);
  for (UserIndex u = 0; u < 6; ++u) c.values[u] = kGoldenReputations[u];
  return c;
}

TEST(UpdateRankings, GoldenRankingsFromGoldenReputations) {
  const auto ex = example1();
  const RankingVector r = update_rankings(ex.ratings, golden_reputations());
  for (ItemIndex i = 0; i < 5; ++i) EXPECT_NEAR(r[i], kGoldenRankings[i], 5e-5) << "item " << i;
}

TEST(UpdateRankings, SingleRaterAndUniformRatings) {
  RatingsMatrix::Builder b(5.0);
  b.add("a", "solo", 3);
  b.add("a", "same", 4);
  b.add("b", "same", 4);
  b.add("c", "same", 4);
  const RatingsMatrix R = std::move(b).build();
  ReputationVector c(3);
  c.values = {1.0, 0.7, 0.3};
  const RankingVector r = update_rankings(R, c);
  EXPECT_DOUBLE_EQ(r[*R.find_item("solo")], 0.6);
  EXPECT_DOUBLE_EQ(r[*R.find_item("same")], 0.8);
}

TEST(UpdateRankings, UnratedItemsListed) {
  RatingsMatrix R({"u"}, {"rated", "never"}, {{0, 0, 0.5}}, 1.0);
  const RankingVector r = update_rankings(R, ReputationVector(1));
  EXPECT_EQ(r.unrated(), (std::vector<ItemIndex>{1}));
}

TEST(UpdateRankings, NonpositiveReputationIsContractViolation) {
  const auto ex = example1();
  ReputationVector c(6);
  c.values[2] = 0.0;
  EXPECT_THROW(update_rankings(ex.ratings, c), ContractError);
}

TEST(UpdateReputations, ZeroDiscordanceAndDirectFormula) {
  RatingsMatrix R({"u"}, {"i"}, {{0, 0, 0.9}}, 1.0);
  RankingVector r(1);
  r.ranked[0] = 1;
  r.values[0] = 0.9;
  EXPECT_DOUBLE_EQ(update_reputations(R, r, 0.5)[0], 1.0);
  r.values[0] = 0.5;  // |0.9 - 0.5| = 0.4
  EXPECT_NEAR(update_reputations(R, r, 0.5)[0], 0.8, 1e-15);
}

TEST(UpdateReputations, GoldenPointIsFixed) {
  const auto ex = example1();
  RankingVector r(5);
  for (ItemIndex i = 0; i < 5; ++i) {
    r.values[i] = kGoldenRankings[i];
    r.ranked[i] = 1;
  }
  const ReputationVector c = update_reputations(ex.ratings, r, 0.5);
  for (UserIndex u = 0; u < 6; ++u) EXPECT_NEAR(c[u], kGoldenReputations[u], 5e-5);
}

TEST(UpdateReputations, UserWithoutRatingsRejected) {
  RatingsMatrix R({"u", "idle"}, {"i"}, {{0, 0, 0.5}}, 1.0);
  RankingVector r(1);
  r.ranked[0] = 1;
  r.values[0] = 0.5;
  std::vector<std::uint8_t> active = {1, 1};
  EXPECT_THROW(update_reputations(R, r, 0.5, active), ContractError);
  EXPECT_FALSE(update_reputations(R, r, 0.5).has(1));
}

TEST(Compute, Example1EightIterations) {
  const auto ex = example1();
  const EngineResult res = compute(ex.ratings, EngineConfig::fixed_iterations(8, 0.5));
  EXPECT_EQ(res.iterations, 8u);
  for (UserIndex u = 0; u < 6; ++u) EXPECT_NEAR(res.reputations[u], kGoldenReputations[u], 5e-5);
  for (ItemIndex i = 0; i < 5; ++i) EXPECT_NEAR(res.rankings[i], kGoldenRankings[i], 5e-5);
}

TEST(Compute, ToleranceModeStopsEarly) {
  const auto ex = example1();
  EngineConfig cfg;
  const EngineResult res = compute(ex.ratings, cfg);
  EXPECT_LT(res.iterations, cfg.max_iterations);
  EXPECT_LT(res.deltas.back(), cfg.convergence_tol);
}

TEST(Compute, ConsensusFixedPoint) {
  RatingsMatrix::Builder b(5.0);
  const int row[] = {5, 3, 4, 1};
  for (int u = 0; u < 4; ++u)
    for (int i = 0; i < 4; ++i) b.add("u" + std::to_string(u), "i" + std::to_string(i), row[i]);
  const RatingsMatrix R = std::move(b).build();
  for (std::size_t n = 1; n <= 5; ++n) {
    const EngineResult res = compute(R, EngineConfig::fixed_iterations(n));
    for (UserIndex u = 0; u < 4; ++u) EXPECT_DOUBLE_EQ(res.reputations[u], 1.0);
    for (ItemIndex i = 0; i < 4; ++i) EXPECT_DOUBLE_EQ(res.rankings[i], row[i] / 5.0);
  }
}

TEST(Compute, EmptyMatrixAndBadLambda) {
  EXPECT_THROW(compute(RatingsMatrix({"u"}, {"i"}, {}, 1.0), EngineConfig{}), InputError);
  const auto ex = example1();
  EXPECT_THROW(compute(ex.ratings, EngineConfig::fixed_iterations(8, 1.0)), InputError);
  EXPECT_THROW(compute(ex.ratings, EngineConfig::fixed_iterations(8, 0.0)), InputError);
}

TEST(Compute, UsersWithoutRatingsExcluded) {
  RatingsMatrix R({"a", "idle", "b"}, {"i", "j"}, {{0, 0, 0.4}, {2, 0, 0.8}, {2, 1, 1.0}}, 1.0);
  const EngineResult res = compute(R, EngineConfig{});
  EXPECT_EQ(res.reputations.inactive_users(), (std::vector<UserIndex>{1}));
  EXPECT_TRUE(res.rankings.has(0));
}

TEST(ArithmeticAverage, Example1) {
  const auto ex = example1();
  const RankingVector r = arithmetic_average(ex.ratings);
  const double expected[] = {0.8, 0.9, 0.8667, 0.6333, 0.5};
  for (ItemIndex i = 0; i < 5; ++i) EXPECT_NEAR(r[i], expected[i], 1e-4);
  EXPECT_DOUBLE_EQ(r[0], (1 + 1 + 1 + 0.8 + 0.4 + 0.6) / 6);
}

TEST(ArithmeticAverage, EmptyColumnUnrated) {
  RatingsMatrix R({"u"}, {"a", "b"}, {{0, 1, 0.2}}, 1.0);
  EXPECT_EQ(arithmetic_average(R).unrated(), (std::vector<ItemIndex>{0}));
}

TEST(Compute, SmallLambdaApproachesArithmeticAverage) {
  Rng rng(11);
  for (int trial = 0; trial < 50; ++trial) {
    const auto s = testing::random_instance(rng, 10, 5, {2}, 0.6);
    EngineConfig cfg;
    cfg.lambda = 1e-6;
    const RankingVector rep = compute(s.ratings, cfg).rankings;
    const RankingVector aa = arithmetic_average(s.ratings);
    for (ItemIndex i = 0; i < 5; ++i) {
      ASSERT_EQ(rep.has(i), aa.has(i));
      if (aa.has(i)) {
        EXPECT_NEAR(rep[i], aa[i], 1e-5);
      }
    }
  }
}

class EngineProperties : public ::testing::TestWithParam<int> {};

TEST_P(EngineProperties, RangeContainmentAndContraction) {
  Rng rng(1000 + GetParam());
  const std::size_t nu = 10 + rng.below(50);
  const std::size_t ni = 5 + rng.below(25);
  const auto s = testing::random_instance(rng, nu, ni, {2}, 0.5);
  const double lambda = 0.05 + 0.9 * rng.unit();
  const RatingsMatrix& R = s.ratings;

  std::vector<double> lo(ni, 2.0), hi(ni, -1.0);
  for (const Rating& e : R.entries()) {
    lo[e.item] = std::min(lo[e.item], e.value);
    hi[e.item] = std::max(hi[e.item], e.value);
  }

  // Step by step so every iterate is checked.
  ReputationVector c(nu);
  std::vector<double> d;  // d[k-1] = max_u |c^k - c^{k-1}|
  for (int k = 0; k < 9; ++k) {
    const RankingVector r = update_rankings(R, c);
    for (ItemIndex i = 0; i < ni; ++i) {
      if (!r.has(i)) continue;
      EXPECT_GE(r[i], lo[i] - 1e-15);
      EXPECT_LE(r[i], hi[i] + 1e-15);
    }
    const ReputationVector next = update_reputations(R, r, lambda);
    double delta = 0.0;
    for (UserIndex u = 0; u < nu; ++u) {
      EXPECT_GT(next[u], 0.0);
      EXPECT_LE(next[u], 1.0);
      EXPECT_GE(next[u], 1.0 - lambda * R.delta_r() - 1e-15);
      delta = std::max(delta, std::abs(next[u] - c[u]));
    }
    d.push_back(delta);
    c = next;
  }
  // d_{k+1} <= d_k from the second iteration on, until round-off.
  for (std::size_t k = 1; k + 1 < d.size(); ++k)
    if (d[k] > 1e-13) {
      EXPECT_LE(d[k + 1], d[k]) << "k=" << k + 1;
    }
  if (d[0] > 0) {
    EXPECT_LT(d[7] / d[0], 0.1);
  }
}

TEST_P(EngineProperties, DeterministicAndPermutationEquivariant) {
  Rng rng(2000 + GetParam());
  const std::size_t nu = 8 + rng.below(30);
  const auto s = testing::random_instance(rng, nu, 12, {2}, 0.4);
  const EngineConfig cfg = EngineConfig::fixed_iterations(20, 0.5);
  const EngineResult a = compute(s.ratings, cfg);
  const EngineResult b = compute(s.ratings, cfg);
  EXPECT_EQ(a.reputations.values, b.reputations.values);
  EXPECT_EQ(a.rankings.values, b.rankings.values);

  std::vector<UserIndex> perm(nu);
  std::iota(perm.begin(), perm.end(), 0);
  for (std::size_t k = nu - 1; k > 0; --k) std::swap(perm[k], perm[rng.below(k + 1)]);
  std::vector<std::string> ids(nu);
  for (UserIndex u = 0; u < nu; ++u) ids[perm[u]] = s.ratings.user_ids()[u];
  std::vector<Rating> entries;
  for (const Rating& e : s.ratings.entries()) entries.push_back({perm[e.user], e.item, e.value});
  const RatingsMatrix P(ids, s.ratings.item_ids(), entries, 5.0);
  const EngineResult p = compute(P, cfg);
  for (UserIndex u = 0; u < nu; ++u)
    EXPECT_NEAR(p.reputations[perm[u]], a.reputations[u], 1e-12);
  for (ItemIndex i = 0; i < 12; ++i) EXPECT_NEAR(p.rankings[i], a.rankings[i], 1e-12);
}

INSTANTIATE_TEST_SUITE_P(Random, EngineProperties, ::testing::Range(0, 40));

}  // namespace
}  // namespace repfair
