#pragma once

// Reputation independence by per-group recentring.
//
// Users are partitioned by one attribute or by k-tuples of attribute classes.
// Every group l is mapped through the positive affine transform
//     c'_u = mu + (c_u - mu_l) * sigma / sigma_l
// so that all groups end with mean mu and standard deviation sigma. With a
// k-tuple partition every marginal class is a disjoint union of groups that
// share mean mu, hence every class of every attribute ends with mean mu too.
//
// Targets default to the minimum group mean and the minimum group sample std,
// which keeps the rescaled reputations inside ]0,1]. The global-mean /
// population-std reading is available through RecenterOptions.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <string>
#include <vector>

#include "repfair/core_model.hpp"
#include "repfair/errors.hpp"
#include "repfair/reputation_engine.hpp"

namespace repfair {

enum class TargetRule { min_of_groups, global };
enum class StdDivisor { sample, population };

struct RecenterOptions {
  TargetRule target = TargetRule::min_of_groups;
  StdDivisor divisor = StdDivisor::sample;
};

struct GroupSummary {
  GroupKey key;
  double mean = 0.0;
  double std = 0.0;
  std::size_t size = 0;
  bool degenerate = false;  // fewer than two members: std reported as 0
};

struct GroupStats {
  std::vector<GroupSummary> groups;  // partition order
  double target_mean = 0.0;
  double target_std = 0.0;
};

struct RecenterLog {
  std::vector<GroupKey> zero_spread_groups;  // size >= 2 but all reputations equal
  std::size_t passthrough_users = 0;         // active users outside every group
};

namespace detail {

inline double mean_std(const std::vector<double>& xs, StdDivisor divisor, double* std_out) {
  const double n = static_cast<double>(xs.size());
  double sum = 0.0;
  for (double x : xs) sum += x;
  const double mean = sum / n;
  double ss = 0.0;
  for (double x : xs) ss += (x - mean) * (x - mean);
  const double denom = divisor == StdDivisor::sample ? n - 1.0 : n;
  *std_out = xs.size() < 2 ? 0.0 : std::sqrt(ss / denom);
  return mean;
}

inline std::vector<double> member_values(const ReputationVector& c,
                                         const std::vector<UserIndex>& users) {
  std::vector<double> xs;
  xs.reserve(users.size());
  for (UserIndex u : users)
    if (u < c.size() && c.has(u)) xs.push_back(c[u]);
  return xs;
}

}  // namespace detail

inline GroupStats group_stats(const ReputationVector& c, const GroupPartition& partition,
                              const RecenterOptions& opts = {}) {
  if (partition.groups.empty()) throw InputError("partition has no groups");
  GroupStats st;
  double min_mean = std::numeric_limits<double>::infinity();
  double min_std = std::numeric_limits<double>::infinity();
  for (const auto& [key, users] : partition.groups) {
    const auto xs = detail::member_values(c, users);
    if (xs.empty()) continue;
    GroupSummary g;
    g.key = key;
    g.size = xs.size();
    g.mean = detail::mean_std(xs, opts.divisor, &g.std);
    g.degenerate = g.size < 2;
    min_mean = std::min(min_mean, g.mean);
    // Singleton and constant groups carry no scale information.
    if (!g.degenerate && g.std > 0.0) min_std = std::min(min_std, g.std);
    st.groups.push_back(std::move(g));
  }
  if (st.groups.empty()) throw InputError("partition has no users with a reputation");

  if (opts.target == TargetRule::min_of_groups) {
    st.target_mean = min_mean;
    st.target_std = std::isfinite(min_std) ? min_std : 0.0;
  } else {
    std::vector<double> all;
    for (UserIndex u = 0; u < c.size(); ++u)
      if (c.has(u)) all.push_back(c[u]);
    st.target_mean = detail::mean_std(all, opts.divisor, &st.target_std);
  }
  return st;
}

inline ReputationVector recenter(const ReputationVector& c, const GroupPartition& partition,
                                 const RecenterOptions& opts = {}, RecenterLog* log = nullptr) {
  const GroupStats st = group_stats(c, partition, opts);
  ReputationVector out = c;

  bool input_in_range = true;
  for (UserIndex u = 0; u < c.size(); ++u)
    if (c.has(u) && !(c[u] > 0.0 && c[u] <= 1.0)) input_in_range = false;

  std::vector<std::uint8_t> covered(c.size(), 0);
  auto summary = st.groups.begin();
  for (const auto& [key, users] : partition.groups) {
    if (summary == st.groups.end() || summary->key != key) continue;  // no active members
    const GroupSummary& g = *summary++;
    const bool flat = !(g.std > 0.0);
    if (flat && !g.degenerate && log) log->zero_spread_groups.push_back(key);
    const double scale = flat ? 0.0 : st.target_std / g.std;
    for (UserIndex u : users) {
      if (u >= c.size() || !c.has(u)) continue;
      covered[u] = 1;
      out.values[u] = flat ? st.target_mean : st.target_mean + (c[u] - g.mean) * scale;
    }
  }
  if (log) {
    for (UserIndex u = 0; u < c.size(); ++u)
      if (c.has(u) && !covered[u]) ++log->passthrough_users;
  }

  if (opts.target == TargetRule::min_of_groups && input_in_range) {
    constexpr double kSlack = 1e-12;
    for (UserIndex u = 0; u < out.size(); ++u) {
      if (!out.has(u)) continue;
      double& v = out.values[u];
      if (v > 1.0 && v <= 1.0 + kSlack) v = 1.0;
      if (!(v > 0.0 && v <= 1.0))
        throw ContractError("recentred reputation " + std::to_string(v) +
                            " left ]0,1] for user index " + std::to_string(u));
    }
  }
  return out;
}

struct FairResult {
  ReputationVector reputations;
  RankingVector rankings;
};

// Recentring on the k-tuple partition of `attrs`, then re-ranking.
inline FairResult multi_fair(const RatingsMatrix& R, const ReputationVector& c,
                             const AttributeSchema& schema, const UserProfiles& profiles,
                             const std::vector<std::string>& attrs,
                             std::size_t min_group_size = 1, const RecenterOptions& opts = {},
                             RecenterLog* log = nullptr) {
  const GroupPartition partition = build_partition(schema, profiles, attrs, min_group_size);
  FairResult out;
  out.reputations = recenter(c, partition, opts, log);
  out.rankings = update_rankings(R, out.reputations);
  return out;
}

inline FairResult single_fair(const RatingsMatrix& R, const ReputationVector& c,
                              const AttributeSchema& schema, const UserProfiles& profiles,
                              const std::string& attr, const RecenterOptions& opts = {},
                              RecenterLog* log = nullptr) {
  return multi_fair(R, c, schema, profiles, {attr}, 1, opts, log);
}

// One single-attribute pass per attribute, in order, each starting from the
// previous pass's reputations.
inline FairResult sequential_fair(const RatingsMatrix& R, const ReputationVector& c,
                                  const AttributeSchema& schema, const UserProfiles& profiles,
                                  const std::vector<std::string>& attrs,
                                  const RecenterOptions& opts = {}) {
  if (attrs.empty()) throw InputError("sequential mitigation needs at least one attribute");
  FairResult out{c, {}};
  for (const auto& a : attrs) out = single_fair(R, out.reputations, schema, profiles, a, opts);
  return out;
}

}  // namespace repfair
