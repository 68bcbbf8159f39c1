#pragma once

// Dataset readers.
//
//   MovieLens-1M   ratings.dat  UserID::MovieID::Rating::Timestamp
//                  users.dat    UserID::Gender::Age::Occupation::Zip-code
//   BookCrossing   BX-Book-Ratings.csv  "User-ID";"ISBN";"Book-Rating"
//                  BX-Users.csv         "User-ID";"Location";"Age"
//   inline         dense CSV matrix (header: user,<item ids...>; empty or 0 =
//                  unrated) plus an attribute CSV (header: user,<attr names...>)
//
// All files are read as raw bytes (both public datasets contain Latin-1).

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "repfair/core_model.hpp"
#include "repfair/errors.hpp"
#include "repfair/rng.hpp"

namespace repfair {

struct IngestStats {
  std::size_t rating_lines = 0;
  std::size_t dropped_implicit = 0;    // BookCrossing 0-valued ratings
  std::size_t missing_profile = 0;     // rated, but absent from the users file
  std::size_t unmapped_location = 0;
  std::size_t missing_age = 0;
};

struct Dataset {
  RatingsMatrix ratings;
  UserProfiles profiles;
  AttributeSchema schema;
  IngestStats stats;
};

// Half-open age ranges ]lo, hi]; the last range may be unbounded.
struct AgeBuckets {
  struct Range {
    int lo;
    std::optional<int> hi;
    std::string label;
  };
  std::vector<Range> ranges;
  int max_valid_age = 120;

  std::vector<std::string> labels() const {
    std::vector<std::string> out;
    for (const auto& r : ranges) out.push_back(r.label);
    return out;
  }

  static AgeBuckets movielens() {
    return {{{0, 17, "<18"},
             {17, 24, "18-24"},
             {24, 34, "25-34"},
             {34, 44, "35-44"},
             {44, 49, "45-49"},
             {49, 55, "50-55"},
             {55, std::nullopt, ">55"}},
            120};
  }

  static AgeBuckets bookcrossing() {
    return {{{0, 20, "<20"}, {20, 40, "20-40"}, {40, 60, "40-60"}, {60, std::nullopt, ">60"}},
            120};
  }
};

inline std::optional<std::string> bucket_age(std::optional<int> age, const AgeBuckets& buckets) {
  if (!age || *age <= 0 || *age > buckets.max_valid_age) return std::nullopt;
  for (const auto& r : buckets.ranges)
    if (*age > r.lo && (!r.hi || *age <= *r.hi)) return r.label;
  return std::nullopt;
}

namespace detail {

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

inline std::string lower(std::string_view s) {
  std::string out(s);
  for (char& ch : out) ch = static_cast<char>(std::tolower(static_cast<unsigned char>(ch)));
  return out;
}

template <typename T>
std::optional<T> parse_number(std::string_view s) {
  s = trim(s);
  T v{};
  auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size()) return std::nullopt;
  return v;
}

inline std::vector<std::string_view> split_token(std::string_view line, std::string_view sep) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = line.find(sep, start);
    if (pos == std::string_view::npos) {
      out.push_back(line.substr(start));
      return out;
    }
    out.push_back(line.substr(start, pos - start));
    start = pos + sep.size();
  }
}

// Delimited fields with optional double quotes; "" and \" inside quotes are
// literal quotes. Returns nullopt on an unterminated quote.
inline std::optional<std::vector<std::string>> split_quoted(std::string_view line, char delim) {
  std::vector<std::string> out;
  std::string cur;
  bool quoted = false;
  bool in_quotes = false;
  for (std::size_t k = 0; k < line.size(); ++k) {
    const char ch = line[k];
    if (in_quotes) {
      if (ch == '\\' && k + 1 < line.size() && line[k + 1] == '"') {
        cur += '"';
        ++k;
      } else if (ch == '"') {
        if (k + 1 < line.size() && line[k + 1] == '"') {
          cur += '"';
          ++k;
        } else {
          in_quotes = false;
        }
      } else {
        cur += ch;
      }
    } else if (ch == '"' && !quoted && trim(cur).empty()) {
      cur.clear();
      quoted = in_quotes = true;
    } else if (ch == delim) {
      out.push_back(quoted ? cur : std::string(trim(cur)));
      cur.clear();
      quoted = false;
    } else {
      cur += ch;
    }
  }
  if (in_quotes) return std::nullopt;
  out.push_back(quoted ? cur : std::string(trim(cur)));
  return out;
}

inline std::ifstream open_input(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open '" + path + "'");
  return in;
}

inline void strip_cr(std::string& line) {
  if (!line.empty() && line.back() == '\r') line.pop_back();
}

// Profiles aligned to the matrix user table from a per-id label map.
inline UserProfiles align_profiles(const RatingsMatrix& R, const AttributeSchema& schema,
                                   const std::unordered_map<std::string, std::vector<std::optional<ClassIndex>>>& labels,
                                   std::size_t* missing_profile) {
  UserProfiles p(schema.size(), R.n_users());
  for (UserIndex u = 0; u < R.n_users(); ++u) {
    auto it = labels.find(R.user_ids()[u]);
    if (it == labels.end()) {
      if (missing_profile) ++*missing_profile;
      continue;
    }
    for (std::size_t a = 0; a < schema.size(); ++a) p.set(u, a, it->second[a]);
  }
  return p;
}

}  // namespace detail

// Country -> continent code (AF, AS, NA, SA, OC, EU), merged into the four
// location classes EU, AS+OC, NA+SA, AF.
class ContinentTable {
 public:
  static std::vector<std::string> merged_classes() { return {"EU", "AS+OC", "NA+SA", "AF"}; }

  static std::optional<std::string> merge(std::string_view code) {
    if (code == "EU") return "EU";
    if (code == "AS" || code == "OC") return "AS+OC";
    if (code == "NA" || code == "SA") return "NA+SA";
    if (code == "AF") return "AF";
    return std::nullopt;
  }

  ContinentTable() = default;

  void add(std::string_view country, std::string_view code) {
    if (!merge(code))
      throw InputError("unknown continent code '" + std::string(code) + "'");
    countries_.try_emplace(detail::lower(detail::trim(country)), std::string(code));
  }

  // Two columns: country, continent code. Delimiter ',' ';' or tab; a header
  // row whose second column is not a continent code is skipped, as are
  // blank lines and lines starting with '#'. The first entry for a country wins.
  static ContinentTable load(const std::string& path) {
    auto in = detail::open_input(path);
    ContinentTable table;
    std::string line;
    std::size_t line_no = 0;
    bool first_row = true;
    while (std::getline(in, line)) {
      ++line_no;
      detail::strip_cr(line);
      const auto t = detail::trim(line);
      if (t.empty() || t.front() == '#') continue;
      const bool header_candidate = std::exchange(first_row, false);
      const char delim = line.find('\t') != std::string::npos ? '\t'
                         : line.find(';') != std::string::npos ? ';'
                                                               : ',';
      auto fields = detail::split_quoted(line, delim);
      if (!fields || fields->size() != 2) throw ParseError(path, line_no, "expected two columns");
      const auto code = std::string(detail::trim((*fields)[1]));
      if (!merge(code)) {
        if (header_candidate) continue;
        throw ParseError(path, line_no, "unknown continent code '" + code + "'");
      }
      table.add((*fields)[0], code);
    }
    return table;
  }

  std::size_t size() const noexcept { return countries_.size(); }

  std::optional<std::string> continent(std::string_view country) const {
    auto it = countries_.find(detail::lower(detail::trim(country)));
    if (it == countries_.end()) return std::nullopt;
    return it->second;
  }

  // "city, region, country" -> merged class of the last component.
  std::optional<std::string> location_class(std::string_view location) const {
    const auto comma = location.rfind(',');
    const auto country = comma == std::string_view::npos ? location : location.substr(comma + 1);
    auto code = continent(country);
    if (!code) return std::nullopt;
    return merge(*code);
  }

 private:
  std::map<std::string, std::string> countries_;
};

inline const std::vector<std::string>& movielens_occupations() {
  static const std::vector<std::string> jobs = {
      "other",          "academic/educator",    "artist",
      "clerical/admin", "college/grad student", "customer service",
      "doctor/health care", "executive/managerial", "farmer",
      "homemaker",      "K-12 student",         "lawyer",
      "programmer",     "retired",              "sales/marketing",
      "scientist",      "self-employed",        "technician/engineer",
      "tradesman/craftsman", "unemployed",      "writer"};
  return jobs;
}

inline AttributeSchema movielens_schema() {
  return AttributeSchema({{"gender", {"m", "f"}},
                          {"age", AgeBuckets::movielens().labels()},
                          {"job", movielens_occupations()}});
}

inline Dataset parse_movielens(const std::string& ratings_path, const std::string& users_path) {
  Dataset ds;
  ds.schema = movielens_schema();
  const AgeBuckets buckets = AgeBuckets::movielens();
  static constexpr int kAgeCodes[] = {1, 18, 25, 35, 45, 50, 56};

  std::unordered_map<std::string, std::vector<std::optional<ClassIndex>>> labels;
  {
    auto in = detail::open_input(users_path);
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
      ++line_no;
      detail::strip_cr(line);
      if (detail::trim(line).empty()) continue;
      const auto f = detail::split_token(line, "::");
      if (f.size() != 5) throw ParseError(users_path, line_no, "expected 5 '::'-separated fields");
      std::vector<std::optional<ClassIndex>> row(3);
      const std::string g = detail::lower(detail::trim(f[1]));
      row[0] = ds.schema.class_index(0, g);
      if (!row[0]) throw ParseError(users_path, line_no, "unknown gender '" + std::string(f[1]) + "'");
      const auto code = detail::parse_number<int>(f[2]);
      if (!code || std::find(std::begin(kAgeCodes), std::end(kAgeCodes), *code) == std::end(kAgeCodes))
        throw ParseError(users_path, line_no, "unknown age code '" + std::string(f[2]) + "'");
      row[1] = ds.schema.class_index(1, *bucket_age(*code, buckets));
      const auto job = detail::parse_number<int>(f[3]);
      if (!job || *job < 0 || *job >= static_cast<int>(movielens_occupations().size()))
        throw ParseError(users_path, line_no, "unknown occupation code '" + std::string(f[3]) + "'");
      row[2] = static_cast<ClassIndex>(*job);
      if (!labels.emplace(std::string(detail::trim(f[0])), std::move(row)).second)
        throw ParseError(users_path, line_no, "duplicate user id");
    }
  }

  RatingsMatrix::Builder b(5.0);
  {
    auto in = detail::open_input(ratings_path);
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
      ++line_no;
      detail::strip_cr(line);
      if (detail::trim(line).empty()) continue;
      const auto f = detail::split_token(line, "::");
      if (f.size() != 4) throw ParseError(ratings_path, line_no, "expected 4 '::'-separated fields");
      const auto rating = detail::parse_number<int>(f[2]);
      if (!rating || *rating < 1 || *rating > 5)
        throw ParseError(ratings_path, line_no, "rating must be a whole star in 1..5");
      b.add(detail::trim(f[0]), detail::trim(f[1]), *rating);
      ++ds.stats.rating_lines;
    }
  }
  try {
    ds.ratings = std::move(b).build();
  } catch (const InputError& e) {
    throw ParseError(ratings_path, 0, e.what());
  }
  ds.profiles = detail::align_profiles(ds.ratings, ds.schema, labels, &ds.stats.missing_profile);
  return ds;
}

inline AttributeSchema bookcrossing_schema() {
  return AttributeSchema(
      {{"age", AgeBuckets::bookcrossing().labels()}, {"location", ContinentTable::merged_classes()}});
}

inline Dataset parse_bookcrossing(const std::string& ratings_path, const std::string& users_path,
                                  const ContinentTable& table) {
  Dataset ds;
  ds.schema = bookcrossing_schema();
  const AgeBuckets buckets = AgeBuckets::bookcrossing();

  RatingsMatrix::Builder b(10.0);
  {
    auto in = detail::open_input(ratings_path);
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
      ++line_no;
      detail::strip_cr(line);
      if (detail::trim(line).empty()) continue;
      auto f = detail::split_quoted(line, ';');
      if (!f || f->size() != 3) throw ParseError(ratings_path, line_no, "expected 3 quoted fields");
      if (line_no == 1 && (*f)[0] == "User-ID") continue;
      const auto rating = detail::parse_number<int>((*f)[2]);
      if (!rating || *rating < 0 || *rating > 10)
        throw ParseError(ratings_path, line_no, "rating must be an integer in 0..10");
      ++ds.stats.rating_lines;
      if (*rating == 0) {
        ++ds.stats.dropped_implicit;
        continue;
      }
      b.add((*f)[0], (*f)[1], *rating);
    }
  }
  try {
    ds.ratings = std::move(b).build();
  } catch (const InputError& e) {
    throw ParseError(ratings_path, 0, e.what());
  }

  std::unordered_map<std::string, std::vector<std::optional<ClassIndex>>> labels;
  {
    auto in = detail::open_input(users_path);
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
      ++line_no;
      detail::strip_cr(line);
      if (detail::trim(line).empty()) continue;
      auto f = detail::split_quoted(line, ';');
      if (!f || f->size() != 3) throw ParseError(users_path, line_no, "expected 3 quoted fields");
      if (line_no == 1 && (*f)[0] == "User-ID") continue;
      std::vector<std::optional<ClassIndex>> row(2);
      if (auto label = bucket_age(detail::parse_number<int>((*f)[2]), buckets))
        row[0] = ds.schema.class_index(0, *label);
      if (auto loc = table.location_class((*f)[1])) row[1] = ds.schema.class_index(1, *loc);
      labels.insert_or_assign((*f)[0], std::move(row));
    }
  }
  ds.profiles = detail::align_profiles(ds.ratings, ds.schema, labels, &ds.stats.missing_profile);
  for (UserIndex u = 0; u < ds.profiles.n_users(); ++u) {
    if (!ds.profiles.class_of(u, 0)) ++ds.stats.missing_age;
    if (!ds.profiles.class_of(u, 1)) ++ds.stats.unmapped_location;
  }
  return ds;
}

namespace detail {

inline char sniff_delimiter(const std::string& header) {
  if (header.find('\t') != std::string::npos) return '\t';
  if (header.find(';') != std::string::npos) return ';';
  return ',';
}

}  // namespace detail

// Small hand-written datasets. Ratings are raw values in ]0, max_rating];
// attribute classes are declared in order of first appearance.
inline Dataset load_inline(const std::string& matrix_path, const std::string& attributes_path,
                           double max_rating = 1.0) {
  Dataset ds;
  RatingsMatrix::Builder b(max_rating);
  {
    auto in = detail::open_input(matrix_path);
    std::string line;
    std::size_t line_no = 0;
    std::vector<std::string> items;
    char delim = ',';
    while (std::getline(in, line)) {
      ++line_no;
      detail::strip_cr(line);
      if (detail::trim(line).empty() || detail::trim(line).front() == '#') continue;
      if (items.empty()) {
        delim = detail::sniff_delimiter(line);
        auto f = detail::split_quoted(line, delim);
        if (!f || f->size() < 2) throw ParseError(matrix_path, line_no, "header needs item columns");
        items.assign(f->begin() + 1, f->end());
        for (const auto& id : items) b.item(id);
        continue;
      }
      auto f = detail::split_quoted(line, delim);
      if (!f || f->size() != items.size() + 1)
        throw ParseError(matrix_path, line_no, "row width differs from header");
      const UserIndex u = b.user((*f)[0]);
      for (std::size_t j = 0; j < items.size(); ++j) {
        const auto cell = detail::trim((*f)[j + 1]);
        if (cell.empty()) continue;
        const auto v = detail::parse_number<double>(cell);
        if (!v) throw ParseError(matrix_path, line_no, "bad rating '" + std::string(cell) + "'");
        if (*v == 0.0) continue;
        try {
          b.add(u, b.item(items[j]), *v);
        } catch (const InputError& e) {
          throw ParseError(matrix_path, line_no, e.what());
        }
      }
      ++ds.stats.rating_lines;
    }
  }
  try {
    ds.ratings = std::move(b).build();
  } catch (const InputError& e) {
    throw ParseError(matrix_path, 0, e.what());
  }

  std::vector<Attribute> attrs;
  std::vector<std::pair<std::string, std::vector<std::string>>> rows;
  {
    auto in = detail::open_input(attributes_path);
    std::string line;
    std::size_t line_no = 0;
    char delim = ',';
    while (std::getline(in, line)) {
      ++line_no;
      detail::strip_cr(line);
      if (detail::trim(line).empty() || detail::trim(line).front() == '#') continue;
      if (attrs.empty()) {
        delim = detail::sniff_delimiter(line);
        auto f = detail::split_quoted(line, delim);
        if (!f || f->size() < 2) throw ParseError(attributes_path, line_no, "header needs attribute columns");
        for (std::size_t j = 1; j < f->size(); ++j) attrs.push_back({(*f)[j], {}});
        continue;
      }
      auto f = detail::split_quoted(line, delim);
      if (!f || f->size() != attrs.size() + 1)
        throw ParseError(attributes_path, line_no, "row width differs from header");
      for (std::size_t j = 0; j < attrs.size(); ++j) {
        const std::string& label = (*f)[j + 1];
        auto& cls = attrs[j].classes;
        if (!label.empty() && std::find(cls.begin(), cls.end(), label) == cls.end())
          cls.push_back(label);
      }
      rows.emplace_back((*f)[0], std::vector<std::string>(f->begin() + 1, f->end()));
    }
  }
  try {
    ds.schema = AttributeSchema(std::move(attrs));
  } catch (const SchemaError& e) {
    throw ParseError(attributes_path, 1, e.what());
  }
  std::unordered_map<std::string, std::vector<std::optional<ClassIndex>>> labels;
  for (const auto& [id, values] : rows) {
    std::vector<std::optional<ClassIndex>> row(values.size());
    for (std::size_t j = 0; j < values.size(); ++j)
      if (!values[j].empty()) row[j] = ds.schema.class_index(j, values[j]);
    labels.insert_or_assign(id, std::move(row));
  }
  ds.profiles = detail::align_profiles(ds.ratings, ds.schema, labels, &ds.stats.missing_profile);
  return ds;
}

struct HoldoutSplit {
  RatingsMatrix train;
  RatingsMatrix test;
};

// Uniform random split of the entries. Both halves keep the full user and
// item id tables, so indices agree across them; users or items seen only in
// test simply have no ratings in train. round(test_fraction * n) entries go
// to test (per user when stratified).
inline HoldoutSplit holdout_split(const RatingsMatrix& R, double test_fraction, std::uint64_t seed,
                                  bool per_user = false) {
  if (!(test_fraction > 0.0 && test_fraction < 1.0))
    throw InputError("test fraction must lie in ]0,1[");
  const auto entries = R.entries();
  std::vector<std::uint8_t> in_test(entries.size(), 0);
  Rng rng(seed, 0);

  auto choose = [&](std::size_t begin, std::size_t end) {
    const std::size_t n = end - begin;
    const auto k = static_cast<std::size_t>(std::llround(test_fraction * static_cast<double>(n)));
    std::vector<std::size_t> idx(n);
    for (std::size_t j = 0; j < n; ++j) idx[j] = begin + j;
    for (std::size_t j = 0; j < k; ++j) {
      const std::size_t pick = j + static_cast<std::size_t>(rng.below(n - j));
      std::swap(idx[j], idx[pick]);
      in_test[idx[j]] = 1;
    }
  };

  if (per_user) {
    std::size_t begin = 0;
    for (UserIndex u = 0; u < R.n_users(); ++u) {
      const std::size_t end = begin + R.user_degree(u);
      choose(begin, end);
      begin = end;
    }
  } else {
    choose(0, entries.size());
  }

  std::vector<Rating> train, test;
  for (std::size_t k = 0; k < entries.size(); ++k) (in_test[k] ? test : train).push_back(entries[k]);
  return {RatingsMatrix(R.user_ids(), R.item_ids(), std::move(train), R.max_raw_rating()),
          RatingsMatrix(R.user_ids(), R.item_ids(), std::move(test), R.max_raw_rating())};
}

}  // namespace repfair
