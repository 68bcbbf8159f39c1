#pragma once

// Shared data model: normalized sparse ratings, sensitive-attribute schema,
// per-user class assignments, demographic partitions and the
// reputation / ranking vectors produced by the engine.
//
// Users and items are identified externally by opaque strings and internally
// by dense indices; every container here keeps the id tables so reports can
// print original identifiers.

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "repfair/errors.hpp"

namespace repfair {

using UserIndex = std::size_t;
using ItemIndex = std::size_t;
using ClassIndex = std::size_t;

struct Rating {
  UserIndex user;
  ItemIndex item;
  double value;  // normalized, in ]0,1]

  friend bool operator==(const Rating&, const Rating&) = default;
};

class RatingsMatrix {
 public:
  class Builder;

  RatingsMatrix() = default;

  // Entries may be in any order; they are sorted by (user, item).
  // Values are already normalized and must lie in ]0,1].
  RatingsMatrix(std::vector<std::string> user_ids, std::vector<std::string> item_ids,
                std::vector<Rating> entries, double max_raw_rating)
      : user_ids_(std::move(user_ids)),
        item_ids_(std::move(item_ids)),
        entries_(std::move(entries)),
        max_raw_(max_raw_rating) {
    if (!(max_raw_ > 0.0)) throw InputError("max_raw_rating must be positive");
    std::sort(entries_.begin(), entries_.end(), [](const Rating& a, const Rating& b) {
      return a.user != b.user ? a.user < b.user : a.item < b.item;
    });
    for (std::size_t k = 0; k < entries_.size(); ++k) {
      const Rating& e = entries_[k];
      if (e.user >= user_ids_.size() || e.item >= item_ids_.size())
        throw InputError("rating references an unknown user or item index");
      if (!(e.value > 0.0 && e.value <= 1.0))
        throw InputError("normalized rating outside ]0,1] for user '" + user_ids_[e.user] +
                         "', item '" + item_ids_[e.item] + "'");
      if (k > 0 && entries_[k - 1].user == e.user && entries_[k - 1].item == e.item)
        throw InputError("duplicate rating for user '" + user_ids_[e.user] + "', item '" +
                         item_ids_[e.item] + "'");
    }
    index();
  }

  std::size_t n_users() const noexcept { return user_ids_.size(); }
  std::size_t n_items() const noexcept { return item_ids_.size(); }
  std::size_t n_entries() const noexcept { return entries_.size(); }
  bool empty() const noexcept { return entries_.empty(); }
  double max_raw_rating() const noexcept { return max_raw_; }

  // max - min over stored ratings; 0 for an empty matrix.
  double delta_r() const noexcept { return delta_r_; }

  std::span<const Rating> entries() const noexcept { return entries_; }

  // I_u: ratings given by user u, ordered by item.
  std::span<const Rating> user_ratings(UserIndex u) const {
    return std::span<const Rating>(entries_).subspan(user_offsets_[u],
                                                      user_offsets_[u + 1] - user_offsets_[u]);
  }

  // U_i: positions into entries() of the ratings given to item i, ordered by user.
  std::span<const std::size_t> item_raters(ItemIndex i) const {
    return std::span<const std::size_t>(item_entries_)
        .subspan(item_offsets_[i], item_offsets_[i + 1] - item_offsets_[i]);
  }

  std::size_t user_degree(UserIndex u) const { return user_offsets_[u + 1] - user_offsets_[u]; }
  std::size_t item_degree(ItemIndex i) const { return item_offsets_[i + 1] - item_offsets_[i]; }

  const std::vector<std::string>& user_ids() const noexcept { return user_ids_; }
  const std::vector<std::string>& item_ids() const noexcept { return item_ids_; }

  std::optional<UserIndex> find_user(std::string_view id) const {
    auto it = std::find(user_ids_.begin(), user_ids_.end(), id);
    if (it == user_ids_.end()) return std::nullopt;
    return static_cast<UserIndex>(it - user_ids_.begin());
  }

  std::optional<ItemIndex> find_item(std::string_view id) const {
    auto it = std::find(item_ids_.begin(), item_ids_.end(), id);
    if (it == item_ids_.end()) return std::nullopt;
    return static_cast<ItemIndex>(it - item_ids_.begin());
  }

  double denormalize(double normalized) const noexcept { return normalized * max_raw_; }

  // Smallest positive rating on the whole-star grid {1..max_raw}/max_raw.
  double min_grid_rating() const noexcept { return 1.0 / max_raw_; }

 private:
  void index() {
    const std::size_t nu = user_ids_.size();
    const std::size_t ni = item_ids_.size();
    user_offsets_.assign(nu + 1, 0);
    item_offsets_.assign(ni + 1, 0);
    double lo = std::numeric_limits<double>::infinity();
    double hi = -lo;
    for (const Rating& e : entries_) {
      ++user_offsets_[e.user + 1];
      ++item_offsets_[e.item + 1];
      lo = std::min(lo, e.value);
      hi = std::max(hi, e.value);
    }
    for (std::size_t u = 0; u < nu; ++u) user_offsets_[u + 1] += user_offsets_[u];
    for (std::size_t i = 0; i < ni; ++i) item_offsets_[i + 1] += item_offsets_[i];
    item_entries_.assign(entries_.size(), 0);
    std::vector<std::size_t> cursor(item_offsets_.begin(), item_offsets_.end() - 1);
    // entries_ is user-major, so each item's list comes out ordered by user.
    for (std::size_t k = 0; k < entries_.size(); ++k)
      item_entries_[cursor[entries_[k].item]++] = k;
    delta_r_ = entries_.empty() ? 0.0 : hi - lo;
  }

  std::vector<std::string> user_ids_;
  std::vector<std::string> item_ids_;
  std::vector<Rating> entries_;
  double max_raw_ = 1.0;
  double delta_r_ = 0.0;
  std::vector<std::size_t> user_offsets_{0};
  std::vector<std::size_t> item_offsets_{0};
  std::vector<std::size_t> item_entries_;
};

// Interns string ids and collects raw ratings; normalizes by max_raw_rating.
class RatingsMatrix::Builder {
 public:
  explicit Builder(double max_raw_rating) : max_raw_(max_raw_rating) {
    if (!(max_raw_ > 0.0)) throw InputError("max_raw_rating must be positive");
  }

  UserIndex user(std::string_view id) { return intern(id, user_ids_, user_lookup_); }
  ItemIndex item(std::string_view id) { return intern(id, item_ids_, item_lookup_); }

  void add(std::string_view user_id, std::string_view item_id, double raw) {
    add(user(user_id), item(item_id), raw);
  }

  void add(UserIndex u, ItemIndex i, double raw) {
    if (!(raw > 0.0 && raw <= max_raw_))
      throw InputError("raw rating " + std::to_string(raw) + " outside ]0, " +
                       std::to_string(max_raw_) + "]");
    entries_.push_back({u, i, raw / max_raw_});
  }

  std::size_t n_users() const noexcept { return user_ids_.size(); }
  std::size_t n_items() const noexcept { return item_ids_.size(); }

  RatingsMatrix build() && {
    return RatingsMatrix(std::move(user_ids_), std::move(item_ids_), std::move(entries_), max_raw_);
  }

 private:
  static std::size_t intern(std::string_view id, std::vector<std::string>& ids,
                            std::unordered_map<std::string, std::size_t>& lookup) {
    auto [it, inserted] = lookup.try_emplace(std::string(id), ids.size());
    if (inserted) ids.emplace_back(id);
    return it->second;
  }

  double max_raw_;
  std::vector<std::string> user_ids_;
  std::vector<std::string> item_ids_;
  std::unordered_map<std::string, std::size_t> user_lookup_;
  std::unordered_map<std::string, std::size_t> item_lookup_;
  std::vector<Rating> entries_;
};

struct Attribute {
  std::string name;
  std::vector<std::string> classes;
};

class AttributeSchema {
 public:
  AttributeSchema() = default;

  explicit AttributeSchema(std::vector<Attribute> attributes) : attributes_(std::move(attributes)) {
    for (std::size_t a = 0; a < attributes_.size(); ++a) {
      const auto& cls = attributes_[a].classes;
      for (std::size_t x = 0; x < cls.size(); ++x)
        for (std::size_t y = x + 1; y < cls.size(); ++y)
          if (cls[x] == cls[y])
            throw SchemaError("duplicate class '" + cls[x] + "' in attribute '" +
                              attributes_[a].name + "'");
      for (std::size_t b = 0; b < a; ++b)
        if (attributes_[b].name == attributes_[a].name)
          throw SchemaError("duplicate attribute '" + attributes_[a].name + "'");
    }
  }

  std::size_t size() const noexcept { return attributes_.size(); }
  const Attribute& operator[](std::size_t a) const { return attributes_[a]; }
  const std::vector<Attribute>& attributes() const noexcept { return attributes_; }

  std::size_t index_of(std::string_view name) const {
    for (std::size_t a = 0; a < attributes_.size(); ++a)
      if (attributes_[a].name == name) return a;
    throw SchemaError("unknown attribute '" + std::string(name) + "'");
  }

  std::optional<ClassIndex> class_index(std::size_t attr, std::string_view label) const {
    const auto& cls = attributes_.at(attr).classes;
    auto it = std::find(cls.begin(), cls.end(), label);
    if (it == cls.end()) return std::nullopt;
    return static_cast<ClassIndex>(it - cls.begin());
  }

 private:
  std::vector<Attribute> attributes_;
};

// Class assignment per (user, attribute); user indices align with the
// RatingsMatrix the profiles were built for.
class UserProfiles {
 public:
  static constexpr ClassIndex kMissing = std::numeric_limits<ClassIndex>::max();

  UserProfiles() = default;
  UserProfiles(std::size_t n_attributes, std::size_t n_users)
      : k_(n_attributes), n_users_(n_users), labels_(n_attributes * n_users, kMissing) {}

  std::size_t n_attributes() const noexcept { return k_; }
  std::size_t n_users() const noexcept { return n_users_; }

  std::optional<ClassIndex> class_of(UserIndex u, std::size_t attr) const {
    ClassIndex c = labels_.at(u * k_ + attr);
    if (c == kMissing) return std::nullopt;
    return c;
  }

  void set(UserIndex u, std::size_t attr, std::optional<ClassIndex> cls) {
    labels_.at(u * k_ + attr) = cls.value_or(kMissing);
  }

  // Looks the label up in the schema; an undeclared label is a schema error.
  void assign(const AttributeSchema& schema, UserIndex u, std::string_view attr_name,
              std::string_view label) {
    const std::size_t a = schema.index_of(attr_name);
    auto c = schema.class_index(a, label);
    if (!c)
      throw SchemaError("class '" + std::string(label) + "' not declared for attribute '" +
                        std::string(attr_name) + "'");
    set(u, a, c);
  }

  UserIndex append_user() {
    labels_.resize(labels_.size() + k_, kMissing);
    return n_users_++;
  }

  bool fully_labeled(UserIndex u, std::span<const std::size_t> attrs) const {
    return std::all_of(attrs.begin(), attrs.end(),
                       [&](std::size_t a) { return labels_[u * k_ + a] != kMissing; });
  }

 private:
  std::size_t k_ = 0;
  std::size_t n_users_ = 0;
  std::vector<ClassIndex> labels_;
};

using GroupKey = std::vector<ClassIndex>;

struct GroupPartition {
  std::vector<std::string> key_attributes;
  std::vector<std::size_t> attribute_indices;
  // Ordered by class index tuple, i.e. schema declaration order.
  std::map<GroupKey, std::vector<UserIndex>> groups;
  std::size_t min_group_size = 1;
  std::size_t excluded_missing = 0;  // users lacking a label on a key attribute
  std::size_t excluded_small = 0;    // users in groups below min_group_size

  std::vector<std::string> labels(const AttributeSchema& schema, const GroupKey& key) const {
    std::vector<std::string> out;
    out.reserve(key.size());
    for (std::size_t j = 0; j < key.size(); ++j)
      out.push_back(schema[attribute_indices[j]].classes[key[j]]);
    return out;
  }

  std::size_t n_included() const {
    std::size_t n = 0;
    for (const auto& [key, users] : groups) n += users.size();
    return n;
  }
};

inline GroupPartition build_partition(const AttributeSchema& schema, const UserProfiles& profiles,
                                      const std::vector<std::string>& attrs,
                                      std::size_t min_group_size = 1) {
  if (attrs.empty()) throw InputError("build_partition needs at least one attribute");
  GroupPartition p;
  p.key_attributes = attrs;
  p.min_group_size = min_group_size;
  for (const auto& name : attrs) p.attribute_indices.push_back(schema.index_of(name));

  GroupKey key(attrs.size());
  for (UserIndex u = 0; u < profiles.n_users(); ++u) {
    if (!profiles.fully_labeled(u, p.attribute_indices)) {
      ++p.excluded_missing;
      continue;
    }
    for (std::size_t j = 0; j < attrs.size(); ++j)
      key[j] = *profiles.class_of(u, p.attribute_indices[j]);
    p.groups[key].push_back(u);
  }
  std::erase_if(p.groups, [&](const auto& kv) {
    if (kv.second.size() >= min_group_size) return false;
    p.excluded_small += kv.second.size();
    return true;
  });
  return p;
}

// c_u per user; users without ratings carry no value.
struct ReputationVector {
  std::vector<double> values;
  std::vector<std::uint8_t> active;

  ReputationVector() = default;
  explicit ReputationVector(std::size_t n, double init = 1.0) : values(n, init), active(n, 1) {}

  std::size_t size() const noexcept { return values.size(); }
  bool has(UserIndex u) const { return active[u] != 0; }
  double operator[](UserIndex u) const { return values[u]; }

  std::vector<UserIndex> inactive_users() const {
    std::vector<UserIndex> out;
    for (UserIndex u = 0; u < active.size(); ++u)
      if (!active[u]) out.push_back(u);
    return out;
  }
};

// r_i per item; items with no ratings are unranked.
struct RankingVector {
  std::vector<double> values;
  std::vector<std::uint8_t> ranked;

  RankingVector() = default;
  explicit RankingVector(std::size_t n) : values(n, 0.0), ranked(n, 0) {}

  std::size_t size() const noexcept { return values.size(); }
  bool has(ItemIndex i) const { return ranked[i] != 0; }
  double operator[](ItemIndex i) const { return values[i]; }

  std::vector<ItemIndex> unrated() const {
    std::vector<ItemIndex> out;
    for (ItemIndex i = 0; i < ranked.size(); ++i)
      if (!ranked[i]) out.push_back(i);
    return out;
  }
};

}  // namespace repfair
