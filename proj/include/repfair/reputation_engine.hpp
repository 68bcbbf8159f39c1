#pragma once

// Iterative reputation-based ranking.
//
// Each iteration first ranks every item as the reputation-weighted mean of its
// ratings, then sets each user's reputation to
//     c_u = 1 - lambda * mean_{i in I_u} |R_ui - r_i|.
// Starting from c_u = 1 this converges geometrically; the arithmetic average
// (all weights equal) is kept alongside as the baseline ranking.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "repfair/core_model.hpp"
#include "repfair/errors.hpp"

namespace repfair {

struct EngineConfig {
  double lambda = 0.5;
  std::size_t max_iterations = 100;
  // Stop once max_u |c_u^{k+1} - c_u^k| < convergence_tol. A tolerance of 0
  // runs exactly max_iterations iterations.
  double convergence_tol = 1e-9;
  double initial_reputation = 1.0;

  static EngineConfig fixed_iterations(std::size_t n, double lambda = 0.5) {
    EngineConfig cfg;
    cfg.lambda = lambda;
    cfg.max_iterations = n;
    cfg.convergence_tol = 0.0;
    return cfg;
  }

  void validate() const {
    if (!(lambda > 0.0 && lambda < 1.0)) throw InputError("lambda must lie in ]0,1[");
    if (!(initial_reputation > 0.0 && initial_reputation <= 1.0))
      throw InputError("initial reputation must lie in ]0,1]");
    if (!(convergence_tol >= 0.0)) throw InputError("convergence tolerance must be >= 0");
    if (max_iterations == 0) throw InputError("max_iterations must be >= 1");
  }
};

struct EngineResult {
  ReputationVector reputations;
  RankingVector rankings;
  std::size_t iterations = 0;
  // deltas[k] = max_u |c^{k+1}_u - c^k_u|
  std::vector<double> deltas;
};

// Reputation-weighted mean over each item's raters. Inactive users
// contribute nothing; an item whose raters are all inactive stays unranked.
inline RankingVector update_rankings(const RatingsMatrix& R, const ReputationVector& c) {
  if (c.size() != R.n_users()) throw InputError("reputation vector size does not match matrix");
  const auto entries = R.entries();
  RankingVector r(R.n_items());
  for (ItemIndex i = 0; i < R.n_items(); ++i) {
    double num = 0.0;
    double den = 0.0;
    for (std::size_t k : R.item_raters(i)) {
      const Rating& e = entries[k];
      if (!c.has(e.user)) continue;
      const double w = c[e.user];
      if (!(w > 0.0))
        throw ContractError("nonpositive reputation for user '" + R.user_ids()[e.user] + "'");
      num += e.value * w;
      den += w;
    }
    if (den > 0.0) {
      r.values[i] = num / den;
      r.ranked[i] = 1;
    }
  }
  return r;
}

// Users marked inactive in `active` keep no reputation. Every active user
// must have at least one rating on a ranked item.
inline ReputationVector update_reputations(const RatingsMatrix& R, const RankingVector& r,
                                           double lambda,
                                           const std::vector<std::uint8_t>& active) {
  if (!(lambda > 0.0 && lambda < 1.0)) throw InputError("lambda must lie in ]0,1[");
  if (r.size() != R.n_items()) throw InputError("ranking vector size does not match matrix");
  ReputationVector c(R.n_users());
  c.active = active;
  for (UserIndex u = 0; u < R.n_users(); ++u) {
    if (!c.active[u]) {
      c.values[u] = 0.0;
      continue;
    }
    const auto ratings = R.user_ratings(u);
    if (ratings.empty())
      throw ContractError("user '" + R.user_ids()[u] + "' has no ratings");
    double dis = 0.0;
    for (const Rating& e : ratings) {
      if (!r.has(e.item))
        throw ContractError("item '" + R.item_ids()[e.item] + "' rated but unranked");
      dis += std::abs(e.value - r[e.item]);
    }
    c.values[u] = 1.0 - lambda / static_cast<double>(ratings.size()) * dis;
  }
  return c;
}

inline ReputationVector update_reputations(const RatingsMatrix& R, const RankingVector& r,
                                           double lambda) {
  std::vector<std::uint8_t> active(R.n_users());
  for (UserIndex u = 0; u < R.n_users(); ++u) active[u] = R.user_degree(u) > 0;
  return update_reputations(R, r, lambda, active);
}

inline EngineResult compute(const RatingsMatrix& R, const EngineConfig& cfg) {
  cfg.validate();
  if (R.empty()) throw InputError("cannot rank an empty ratings matrix");

  ReputationVector c(R.n_users(), cfg.initial_reputation);
  for (UserIndex u = 0; u < R.n_users(); ++u) {
    if (R.user_degree(u) == 0) {
      c.active[u] = 0;
      c.values[u] = 0.0;
    }
  }

  EngineResult out;
  for (std::size_t k = 0; k < cfg.max_iterations; ++k) {
    out.rankings = update_rankings(R, c);
    ReputationVector next = update_reputations(R, out.rankings, cfg.lambda, c.active);
    double delta = 0.0;
    for (UserIndex u = 0; u < R.n_users(); ++u)
      if (c.active[u]) delta = std::max(delta, std::abs(next.values[u] - c.values[u]));
    c = std::move(next);
    out.deltas.push_back(delta);
    ++out.iterations;
    if (delta < cfg.convergence_tol) break;
  }
  out.reputations = std::move(c);
  return out;
}

inline RankingVector arithmetic_average(const RatingsMatrix& R) {
  const auto entries = R.entries();
  RankingVector r(R.n_items());
  for (ItemIndex i = 0; i < R.n_items(); ++i) {
    const auto raters = R.item_raters(i);
    if (raters.empty()) continue;
    double sum = 0.0;
    for (std::size_t k : raters) sum += entries[k].value;
    r.values[i] = sum / static_cast<double>(raters.size());
    r.ranked[i] = 1;
  }
  return r;
}

}  // namespace repfair
