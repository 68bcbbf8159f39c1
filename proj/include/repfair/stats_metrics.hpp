#pragma once

// Evaluation statistics: disparate reputation (difference of class mean
// reputations), the two-sample location test used to judge it, Kendall's
// tau-b between rankings, RMSE, and box-whisker summaries.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <boost/math/special_functions/beta.hpp>

#include "repfair/core_model.hpp"
#include "repfair/errors.hpp"

namespace repfair {

enum class LocationTestKind { welch, pooled };

struct LTResult {
  double statistic = 0.0;
  double degrees_of_freedom = 0.0;
  double p_value = 1.0;
  bool reject = false;
  double alpha = 0.05;
};

inline double mean_of(std::span<const double> xs) {
  double s = 0.0;
  for (double x : xs) s += x;
  return s / static_cast<double>(xs.size());
}

inline double sample_variance(std::span<const double> xs, double mean) {
  double ss = 0.0;
  for (double x : xs) ss += (x - mean) * (x - mean);
  return ss / static_cast<double>(xs.size() - 1);
}

inline std::vector<double> reputations_of(const ReputationVector& c,
                                          std::span<const UserIndex> users) {
  std::vector<double> xs;
  xs.reserve(users.size());
  for (UserIndex u : users)
    if (u < c.size() && c.has(u)) xs.push_back(c[u]);
  return xs;
}

// mu_a - mu_b over the users of each group that carry a reputation.
inline double disparate_reputation(const ReputationVector& c, std::span<const UserIndex> group_a,
                                   std::span<const UserIndex> group_b) {
  const auto a = reputations_of(c, group_a);
  const auto b = reputations_of(c, group_b);
  if (a.empty() || b.empty()) throw InputError("disparate reputation needs two non-empty groups");
  return mean_of(a) - mean_of(b);
}

// Two-sided p-value of a Student t statistic: I_{df/(df+t^2)}(df/2, 1/2).
inline double student_t_two_sided_p(double t, double df) {
  if (std::isinf(t)) return 0.0;
  if (t == 0.0) return 1.0;
  const double x = df / (df + t * t);
  return std::clamp(boost::math::ibeta(df / 2.0, 0.5, x), 0.0, 1.0);
}

inline LTResult location_test(std::span<const double> a, std::span<const double> b,
                              double alpha = 0.05,
                              LocationTestKind kind = LocationTestKind::welch) {
  if (a.size() < 2 || b.size() < 2) throw InputError("location test needs >= 2 values per sample");
  if (!(alpha > 0.0 && alpha < 1.0)) throw InputError("alpha must lie in ]0,1[");
  const double na = static_cast<double>(a.size());
  const double nb = static_cast<double>(b.size());
  const double ma = mean_of(a);
  const double mb = mean_of(b);
  const double va = sample_variance(a, ma);
  const double vb = sample_variance(b, mb);

  LTResult res;
  res.alpha = alpha;
  double se2 = 0.0;
  if (kind == LocationTestKind::welch) {
    const double qa = va / na;
    const double qb = vb / nb;
    se2 = qa + qb;
    const double den = qa * qa / (na - 1.0) + qb * qb / (nb - 1.0);
    res.degrees_of_freedom = den > 0.0 ? se2 * se2 / den : na + nb - 2.0;
  } else {
    const double pooled = ((na - 1.0) * va + (nb - 1.0) * vb) / (na + nb - 2.0);
    se2 = pooled * (1.0 / na + 1.0 / nb);
    res.degrees_of_freedom = na + nb - 2.0;
  }

  const double diff = ma - mb;
  if (se2 == 0.0) {
    // Both samples constant: identical means are indistinguishable, anything
    // else is separated with certainty.
    res.statistic = diff == 0.0 ? 0.0 : std::copysign(std::numeric_limits<double>::infinity(), diff);
    res.p_value = diff == 0.0 ? 1.0 : 0.0;
  } else {
    res.statistic = diff / std::sqrt(se2);
    res.p_value = student_t_two_sided_p(res.statistic, res.degrees_of_freedom);
  }
  res.reject = res.p_value < alpha;
  return res;
}

struct DRCell {
  std::size_t row = 0;  // index into DRMatrix::classes
  std::size_t col = 0;
  double delta = 0.0;
  LTResult test;
};

struct DRMatrix {
  std::vector<GroupKey> classes;  // partition order
  std::vector<double> means;      // per class, same order
  std::vector<std::size_t> sizes;
  std::vector<DRCell> cells;      // upper triangle, row-major

  double delta(std::size_t a, std::size_t b) const {
    if (a == b) return 0.0;
    for (const auto& cell : cells) {
      if (cell.row == a && cell.col == b) return cell.delta;
      if (cell.row == b && cell.col == a) return -cell.delta;
    }
    throw InputError("class pair not in DR matrix");
  }
};

// Pairwise DR with a location test per pair. Classes with fewer than two
// reputations get a cell without a meaningful test (p = 1, no reject).
inline DRMatrix dr_matrix(const ReputationVector& c, const GroupPartition& partition,
                          double alpha = 0.05, LocationTestKind kind = LocationTestKind::welch) {
  if (partition.groups.size() < 2) throw InputError("DR matrix needs at least two groups");
  DRMatrix m;
  std::vector<std::vector<double>> samples;
  for (const auto& [key, users] : partition.groups) {
    auto xs = reputations_of(c, users);
    if (xs.empty()) continue;
    m.classes.push_back(key);
    m.means.push_back(mean_of(xs));
    m.sizes.push_back(xs.size());
    samples.push_back(std::move(xs));
  }
  if (samples.size() < 2) throw InputError("DR matrix needs at least two non-empty groups");
  for (std::size_t a = 0; a < samples.size(); ++a) {
    for (std::size_t b = a + 1; b < samples.size(); ++b) {
      DRCell cell;
      cell.row = a;
      cell.col = b;
      cell.delta = m.means[a] - m.means[b];
      if (samples[a].size() >= 2 && samples[b].size() >= 2) {
        cell.test = location_test(samples[a], samples[b], alpha, kind);
      } else {
        cell.test.alpha = alpha;
        cell.test.statistic = std::numeric_limits<double>::quiet_NaN();
      }
      m.cells.push_back(cell);
    }
  }
  return m;
}

// Mean reputation per class of one attribute (nullopt for empty classes).
inline std::vector<std::optional<double>> class_means(const ReputationVector& c,
                                                      const AttributeSchema& schema,
                                                      const UserProfiles& profiles,
                                                      std::size_t attr) {
  const std::size_t s = schema[attr].classes.size();
  std::vector<double> sum(s, 0.0);
  std::vector<std::size_t> cnt(s, 0);
  for (UserIndex u = 0; u < profiles.n_users() && u < c.size(); ++u) {
    if (!c.has(u)) continue;
    if (auto cls = profiles.class_of(u, attr)) {
      sum[*cls] += c[u];
      ++cnt[*cls];
    }
  }
  std::vector<std::optional<double>> out(s);
  for (std::size_t k = 0; k < s; ++k)
    if (cnt[k] > 0) out[k] = sum[k] / static_cast<double>(cnt[k]);
  return out;
}

// Largest |DR| between any two non-empty classes of any listed attribute.
inline double max_marginal_dr(const ReputationVector& c, const AttributeSchema& schema,
                              const UserProfiles& profiles, const std::vector<std::string>& attrs) {
  double worst = 0.0;
  for (const auto& name : attrs) {
    const auto means = class_means(c, schema, profiles, schema.index_of(name));
    double lo = std::numeric_limits<double>::infinity();
    double hi = -lo;
    for (const auto& m : means) {
      if (!m) continue;
      lo = std::min(lo, *m);
      hi = std::max(hi, *m);
    }
    if (hi >= lo) worst = std::max(worst, hi - lo);
  }
  return worst;
}

namespace detail {

inline std::uint64_t tie_pairs(std::uint64_t run) { return run * (run - 1) / 2; }

// Sorts v in place and returns the number of inversions removed.
inline std::uint64_t merge_count(std::vector<double>& v, std::vector<double>& buf, std::size_t lo,
                                 std::size_t hi) {
  if (hi - lo < 2) return 0;
  const std::size_t mid = lo + (hi - lo) / 2;
  std::uint64_t swaps = merge_count(v, buf, lo, mid) + merge_count(v, buf, mid, hi);
  std::size_t i = lo, j = mid, k = lo;
  while (i < mid && j < hi) {
    if (v[j] < v[i]) {
      swaps += mid - i;
      buf[k++] = v[j++];
    } else {
      buf[k++] = v[i++];
    }
  }
  while (i < mid) buf[k++] = v[i++];
  while (j < hi) buf[k++] = v[j++];
  std::copy(buf.begin() + lo, buf.begin() + hi, v.begin() + lo);
  return swaps;
}

}  // namespace detail

// Kendall tau-b of paired observations, O(n log n) (Knight's algorithm).
// If both sides are entirely tied the orders agree trivially and 1 is
// returned; if only one side is, 0.
inline double kendall_tau(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw InputError("kendall_tau: length mismatch");
  const std::size_t n = x.size();
  if (n < 2) throw InputError("kendall_tau needs at least two paired values");

  std::vector<std::pair<double, double>> p(n);
  for (std::size_t k = 0; k < n; ++k) p[k] = {x[k], y[k]};
  std::sort(p.begin(), p.end());

  const std::uint64_t n0 = detail::tie_pairs(n);
  std::uint64_t n1 = 0, n3 = 0;
  for (std::size_t k = 0; k < n;) {
    std::size_t e = k;
    while (e < n && p[e].first == p[k].first) ++e;
    n1 += detail::tie_pairs(e - k);
    for (std::size_t j = k; j < e;) {
      std::size_t f = j;
      while (f < e && p[f].second == p[j].second) ++f;
      n3 += detail::tie_pairs(f - j);
      j = f;
    }
    k = e;
  }

  std::vector<double> ys(n), buf(n);
  for (std::size_t k = 0; k < n; ++k) ys[k] = p[k].second;
  const std::uint64_t swaps = detail::merge_count(ys, buf, 0, n);

  std::uint64_t n2 = 0;
  for (std::size_t k = 0; k < n;) {
    std::size_t e = k;
    while (e < n && ys[e] == ys[k]) ++e;
    n2 += detail::tie_pairs(e - k);
    k = e;
  }

  const std::uint64_t tx = n0 - n1;  // pairs not tied in x
  const std::uint64_t ty = n0 - n2;
  if (tx == 0 && ty == 0) return 1.0;
  if (tx == 0 || ty == 0) return 0.0;
  // n0 - n1 - n2 + n3 - 2*swaps = concordant - discordant
  const double num = static_cast<double>(static_cast<std::int64_t>(n0 + n3) -
                                         static_cast<std::int64_t>(n1 + n2 + 2 * swaps));
  return num / std::sqrt(static_cast<double>(tx) * static_cast<double>(ty));
}

// tau-b over the items ranked in both vectors.
inline double kendall_tau(const RankingVector& r1, const RankingVector& r2) {
  const std::size_t n = std::min(r1.size(), r2.size());
  std::vector<double> x, y;
  for (ItemIndex i = 0; i < n; ++i) {
    if (r1.has(i) && r2.has(i)) {
      x.push_back(r1[i]);
      y.push_back(r2[i]);
    }
  }
  if (x.size() < 2) throw InputError("kendall_tau needs at least two commonly ranked items");
  return kendall_tau(x, y);
}

inline double rmse(std::span<const double> u, std::span<const double> v) {
  if (u.size() != v.size()) throw InputError("rmse: length mismatch");
  if (u.empty()) throw InputError("rmse needs at least one value");
  double ss = 0.0;
  for (std::size_t k = 0; k < u.size(); ++k) ss += (u[k] - v[k]) * (u[k] - v[k]);
  return std::sqrt(ss / static_cast<double>(u.size()));
}

struct FiveNumberSummary {
  double min = 0.0, q1 = 0.0, median = 0.0, q3 = 0.0, max = 0.0;
};

// Quartiles by linear interpolation between order statistics.
inline FiveNumberSummary five_number_summary(std::vector<double> xs) {
  if (xs.empty()) throw InputError("summary of an empty sample");
  std::sort(xs.begin(), xs.end());
  auto q = [&](double p) {
    const double h = p * static_cast<double>(xs.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(h));
    const std::size_t hi = std::min(lo + 1, xs.size() - 1);
    return xs[lo] + (h - static_cast<double>(lo)) * (xs[hi] - xs[lo]);
  };
  return {xs.front(), q(0.25), q(0.5), q(0.75), xs.back()};
}

}  // namespace repfair
