#pragma once

// Rating attacks and ranking robustness.
//
// random_spam  attackers rate random items with random whole-star ratings;
//              total injected ratings = floor(p * existing ratings).
// love_hate    attackers give the target the top rating and a random side set
//              of items the lowest positive rating; attackers = floor(p * raters of target).
// hate_love    the mirror image of love_hate.
//
// Robustness of a ranking method is Kendall tau-b between its clean and its
// attacked rankings over the original items.

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "repfair/core_model.hpp"
#include "repfair/errors.hpp"
#include "repfair/pipeline.hpp"
#include "repfair/rng.hpp"
#include "repfair/stats_metrics.hpp"

namespace repfair {

enum class AttackKind { random_spam, love_hate, hate_love };

inline const char* to_string(AttackKind k) {
  switch (k) {
    case AttackKind::random_spam: return "random_spam";
    case AttackKind::love_hate: return "love_hate";
    case AttackKind::hate_love: return "hate_love";
  }
  return "?";
}

inline AttackKind parse_attack_kind(const std::string& s) {
  if (s == "random_spam" || s == "random-spam") return AttackKind::random_spam;
  if (s == "love_hate" || s == "love-hate") return AttackKind::love_hate;
  if (s == "hate_love" || s == "hate-love") return AttackKind::hate_love;
  throw InputError("unknown attack kind '" + s + "'");
}

struct AttackSpec {
  AttackKind kind = AttackKind::love_hate;
  std::optional<std::string> target_item;  // ignored for random_spam
  double proportion = 0.1;
  std::size_t side_set_size = 10;
  std::uint64_t rng_seed = 0;
  // Attackers get uniformly random classes; when false they stay unlabeled
  // and so never enter a demographic partition.
  bool label_attackers = true;
};

struct AttackResult {
  RatingsMatrix matrix;
  UserProfiles profiles;
  std::vector<UserIndex> attackers;
};

// floor(p * base), guarded against p*base landing a hair under an integer.
inline std::size_t attack_count(double proportion, std::size_t base) {
  return static_cast<std::size_t>(std::floor(proportion * static_cast<double>(base) + 1e-9));
}

// Item with the most ratings; ties go to the lowest index.
inline ItemIndex most_rated_item(const RatingsMatrix& R) {
  if (R.n_items() == 0) throw InputError("matrix has no items");
  ItemIndex best = 0;
  for (ItemIndex i = 1; i < R.n_items(); ++i)
    if (R.item_degree(i) > R.item_degree(best)) best = i;
  return best;
}

namespace detail {

// k distinct items drawn uniformly from [0, n) \ {excluded}.
inline std::vector<ItemIndex> sample_items(Rng& rng, std::size_t n, std::size_t k,
                                           std::optional<ItemIndex> excluded) {
  std::vector<ItemIndex> pool;
  pool.reserve(n);
  for (ItemIndex i = 0; i < n; ++i)
    if (i != excluded) pool.push_back(i);
  for (std::size_t j = 0; j < k; ++j) {
    const std::size_t pick = j + static_cast<std::size_t>(rng.below(pool.size() - j));
    std::swap(pool[j], pool[pick]);
  }
  pool.resize(k);
  return pool;
}

inline std::string fresh_id(const std::vector<std::string>& existing, std::size_t k) {
  std::string id = "attacker-" + std::to_string(k);
  while (std::find(existing.begin(), existing.end(), id) != existing.end()) id += "'";
  return id;
}

}  // namespace detail

inline AttackResult inject(const RatingsMatrix& R, const UserProfiles& profiles,
                           const AttributeSchema& schema, const AttackSpec& spec) {
  if (!(spec.proportion > 0.0 && spec.proportion < 1.0))
    throw InputError("attack proportion must lie in ]0,1[");
  if (profiles.n_users() != R.n_users())
    throw InputError("profiles do not align with the ratings matrix");

  std::optional<ItemIndex> target;
  std::size_t n_attackers = 0;
  std::size_t spam_budget = 0;
  if (spec.kind == AttackKind::random_spam) {
    if (spec.side_set_size == 0 || spec.side_set_size > R.n_items())
      throw InputError("side set size must lie in [1, n_items]");
    spam_budget = attack_count(spec.proportion, R.n_entries());
    n_attackers = (spam_budget + spec.side_set_size - 1) / spec.side_set_size;
  } else {
    if (!spec.target_item) throw InputError("targeted attack needs a target item");
    target = R.find_item(*spec.target_item);
    if (!target) throw InputError("target item '" + *spec.target_item + "' not in matrix");
    if (R.n_items() < 1 || spec.side_set_size > R.n_items() - 1)
      throw InputError("side set cannot exclude the target: side_set_size > n_items - 1");
    n_attackers = attack_count(spec.proportion, R.item_degree(*target));
  }

  AttackResult out;
  if (n_attackers == 0) {
    out.matrix = R;
    out.profiles = profiles;
    return out;
  }

  std::vector<std::string> user_ids = R.user_ids();
  std::vector<Rating> entries(R.entries().begin(), R.entries().end());
  out.profiles = profiles;

  const double top = 1.0;
  const double bottom = R.min_grid_rating();
  const auto grid = static_cast<std::uint64_t>(std::max(1.0, std::floor(R.max_raw_rating())));

  for (std::size_t k = 0; k < n_attackers; ++k) {
    Rng rng(spec.rng_seed, k + 1);
    const UserIndex u = user_ids.size();
    user_ids.push_back(detail::fresh_id(R.user_ids(), k));
    out.attackers.push_back(u);
    out.profiles.append_user();

    if (spec.kind == AttackKind::random_spam) {
      const std::size_t m = std::min(spec.side_set_size, spam_budget - k * spec.side_set_size);
      for (ItemIndex i : detail::sample_items(rng, R.n_items(), m, std::nullopt)) {
        const double raw = static_cast<double>(1 + rng.below(grid));
        entries.push_back({u, i, raw / R.max_raw_rating()});
      }
    } else {
      const bool love = spec.kind == AttackKind::love_hate;
      entries.push_back({u, *target, love ? top : bottom});
      for (ItemIndex i : detail::sample_items(rng, R.n_items(), spec.side_set_size, target))
        entries.push_back({u, i, love ? bottom : top});
    }

    if (spec.label_attackers) {
      for (std::size_t a = 0; a < schema.size(); ++a) {
        const std::size_t s = schema[a].classes.size();
        if (s > 0) out.profiles.set(u, a, static_cast<ClassIndex>(rng.below(s)));
      }
    }
  }

  out.matrix = RatingsMatrix(std::move(user_ids), R.item_ids(), std::move(entries),
                             R.max_raw_rating());
  return out;
}

// tau-b between clean and attacked rankings of one method, over the items of
// the clean matrix.
inline double robustness(const RatingsMatrix& clean, const UserProfiles& clean_profiles,
                         const RatingsMatrix& attacked, const UserProfiles& attacked_profiles,
                         const AttributeSchema& schema, const EngineConfig& cfg,
                         const RankingMethod& method, const RecenterOptions& opts = {}) {
  if (attacked.n_items() < clean.n_items())
    throw InputError("attacked matrix lost items of the clean matrix");
  RankingVector a = rank_with(clean, schema, clean_profiles, cfg, method, opts);
  RankingVector b = rank_with(attacked, schema, attacked_profiles, cfg, method, opts);
  b.values.resize(clean.n_items());
  b.ranked.resize(clean.n_items());
  return kendall_tau(a, b);
}

struct SweepRow {
  AttackKind kind;
  double proportion;
  std::string method;
  std::uint64_t seed;
  double tau;
};

struct SweepConfig {
  std::vector<AttackKind> kinds;
  std::vector<double> proportions;
  std::vector<RankingMethod> methods;
  std::vector<std::uint64_t> seeds;
  std::optional<std::string> love_hate_target;  // default: most rated item
  std::optional<std::string> hate_love_target;
  std::size_t side_set_size = 10;
  bool label_attackers = true;
};

// Rows ordered by kind, method, seed, then proportion in the given order.
inline std::vector<SweepRow> attack_sweep(const RatingsMatrix& R, const UserProfiles& profiles,
                                          const AttributeSchema& schema, const EngineConfig& cfg,
                                          const SweepConfig& sweep,
                                          const RecenterOptions& opts = {}) {
  if (sweep.kinds.empty() || sweep.proportions.empty() || sweep.methods.empty() ||
      sweep.seeds.empty())
    throw InputError("attack sweep needs non-empty kinds, proportions, methods and seeds");

  std::vector<RankingVector> clean;
  for (const auto& m : sweep.methods) clean.push_back(rank_with(R, schema, profiles, cfg, m, opts));
  const std::string default_target = R.item_ids()[most_rated_item(R)];

  const std::size_t nm = sweep.methods.size();
  const std::size_t ns = sweep.seeds.size();
  const std::size_t np = sweep.proportions.size();
  std::vector<SweepRow> rows(sweep.kinds.size() * nm * ns * np);

  for (std::size_t k = 0; k < sweep.kinds.size(); ++k) {
    AttackSpec spec;
    spec.kind = sweep.kinds[k];
    spec.side_set_size = sweep.side_set_size;
    spec.label_attackers = sweep.label_attackers;
    if (spec.kind == AttackKind::love_hate) spec.target_item = sweep.love_hate_target.value_or(default_target);
    if (spec.kind == AttackKind::hate_love) spec.target_item = sweep.hate_love_target.value_or(default_target);
    for (std::size_t s = 0; s < ns; ++s) {
      spec.rng_seed = sweep.seeds[s];
      for (std::size_t p = 0; p < np; ++p) {
        spec.proportion = sweep.proportions[p];
        const AttackResult att = inject(R, profiles, schema, spec);
        for (std::size_t m = 0; m < nm; ++m) {
          RankingVector b = rank_with(att.matrix, schema, att.profiles, cfg, sweep.methods[m], opts);
          b.values.resize(R.n_items());
          b.ranked.resize(R.n_items());
          rows[((k * nm + m) * ns + s) * np + p] = {spec.kind, spec.proportion,
                                                    sweep.methods[m].name, spec.rng_seed,
                                                    kendall_tau(clean[m], b)};
        }
      }
    }
  }
  return rows;
}

// Shortest round-trip decimal form; byte-stable across runs.
inline std::string format_number(double x) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, res.ptr);
}

inline void write_sweep_csv(std::ostream& os, const std::vector<SweepRow>& rows) {
  os << "kind,proportion,method,seed,tau\n";
  for (const auto& r : rows)
    os << to_string(r.kind) << ',' << format_number(r.proportion) << ',' << r.method << ','
       << r.seed << ',' << format_number(r.tau) << '\n';
}

}  // namespace repfair
