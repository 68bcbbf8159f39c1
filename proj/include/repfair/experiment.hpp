#pragma once

// End-to-end experiment runner: ingest -> engine -> mitigation -> metrics,
// plus optional robustness sweep and held-out quality evaluation. Reports are
// emitted either as one JSON document or as a directory of CSV tables.

#include <chrono>
#include <cstdint>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "repfair/attack_sim.hpp"
#include "repfair/core_model.hpp"
#include "repfair/data_ingest.hpp"
#include "repfair/errors.hpp"
#include "repfair/independence.hpp"
#include "repfair/pipeline.hpp"
#include "repfair/reputation_engine.hpp"
#include "repfair/stats_metrics.hpp"

namespace repfair {

enum class DatasetKind { movielens, bookcrossing, inline_csv };
enum class ReportFormat { json, csv_bundle };

inline DatasetKind parse_dataset_kind(const std::string& s) {
  if (s == "movielens" || s == "ml-1m") return DatasetKind::movielens;
  if (s == "bookcrossing") return DatasetKind::bookcrossing;
  if (s == "inline") return DatasetKind::inline_csv;
  throw InputError("unknown dataset '" + s + "' (movielens | bookcrossing | inline)");
}

inline const char* to_string(DatasetKind k) {
  switch (k) {
    case DatasetKind::movielens: return "movielens";
    case DatasetKind::bookcrossing: return "bookcrossing";
    case DatasetKind::inline_csv: return "inline";
  }
  return "?";
}

inline ReportFormat parse_report_format(const std::string& s) {
  if (s == "json") return ReportFormat::json;
  if (s == "csv" || s == "csv-bundle") return ReportFormat::csv_bundle;
  throw InputError("unknown report format '" + s + "' (json | csv-bundle)");
}

struct AttackConfig {
  AttackKind kind = AttackKind::love_hate;
  std::optional<std::string> target;
  std::vector<double> proportions = {0.05, 0.10, 0.15, 0.20, 0.25, 0.30, 0.35, 0.40, 0.45};
  std::size_t side_set_size = 10;
  bool label_attackers = true;
};

struct ExperimentConfig {
  DatasetKind dataset = DatasetKind::inline_csv;
  std::string ratings_path;
  std::string users_path;
  std::string continent_table_path;
  double max_rating = 1.0;  // inline datasets only

  EngineConfig engine;
  Mitigation mitigation;
  RecenterOptions recenter;
  // Attributes whose DR tables are reported; empty = every schema attribute.
  std::vector<std::string> report_attributes;
  std::size_t min_group_size = 1;

  std::optional<AttackConfig> attack;
  std::optional<double> split_fraction;
  bool stratified_split = false;
  double alpha = 0.05;
  LocationTestKind test_kind = LocationTestKind::welch;
  std::uint64_t seed = 42;
  bool record_timestamps = false;

  std::string out_path;
  ReportFormat format = ReportFormat::json;
};

struct GroupRow {
  std::string label;
  std::size_t size = 0;
  double mean = 0.0;
  double std = 0.0;
  FiveNumberSummary box;
};

struct AttributeReport {
  std::string attribute;
  std::string stage;  // "engine" or "mitigated"
  std::vector<GroupRow> groups;
  std::vector<std::string> class_labels;  // DR matrix order
  DRMatrix dr;
};

struct QualityReport {
  double tau_vs_aa = 1.0;
  std::optional<double> rmse_test;           // normalized scale
  std::optional<double> rmse_test_rescaled;  // original rating scale
  std::size_t n_test = 0;
  std::size_t test_excluded = 0;  // test items unranked by the training side
};

struct ExperimentReport {
  std::vector<std::pair<std::string, std::string>> config_echo;
  std::optional<std::string> started_at;
  std::string recentring_variant;
  std::size_t n_users = 0, n_items = 0, n_entries = 0;
  std::size_t iterations = 0;
  double final_delta = 0.0;
  std::size_t users_without_ratings = 0;
  std::size_t unranked_items = 0;
  std::size_t unlabeled_users = 0;  // missing a label on a mitigation attribute
  std::vector<std::string> warnings;

  std::vector<std::string> user_ids;
  std::vector<std::optional<double>> reputations;  // final, per user
  std::vector<std::string> item_ids;
  std::vector<std::optional<double>> rankings;     // final, per item

  std::vector<AttributeReport> attributes;
  QualityReport quality;
  std::vector<SweepRow> robustness;
};

inline std::string recentring_variant(const RecenterOptions& o) {
  std::string s = o.target == TargetRule::min_of_groups ? "min-of-groups targets" : "global targets";
  s += o.divisor == StdDivisor::sample ? ", sample std (n-1)" : ", population std (n)";
  return s;
}

inline Dataset load_dataset(const ExperimentConfig& cfg) {
  switch (cfg.dataset) {
    case DatasetKind::movielens:
      return parse_movielens(cfg.ratings_path, cfg.users_path);
    case DatasetKind::bookcrossing:
      if (cfg.continent_table_path.empty())
        throw InputError("bookcrossing needs a continent table");
      return parse_bookcrossing(cfg.ratings_path, cfg.users_path,
                                ContinentTable::load(cfg.continent_table_path));
    case DatasetKind::inline_csv:
      return load_inline(cfg.ratings_path, cfg.users_path, cfg.max_rating);
  }
  throw InputError("unknown dataset kind");
}

inline std::vector<std::pair<std::string, std::string>> echo_config(const ExperimentConfig& c) {
  std::vector<std::pair<std::string, std::string>> e = {
      {"dataset", to_string(c.dataset)},
      {"ratings", c.ratings_path},
      {"users", c.users_path},
      {"continent_table", c.continent_table_path},
      {"max_rating", format_number(c.max_rating)},
      {"lambda", format_number(c.engine.lambda)},
      {"max_iterations", std::to_string(c.engine.max_iterations)},
      {"tol", format_number(c.engine.convergence_tol)},
      {"mitigation", c.mitigation.to_string()},
      {"min_group_size", std::to_string(c.min_group_size)},
      {"targets", c.recenter.target == TargetRule::min_of_groups ? "min" : "global"},
      {"std", c.recenter.divisor == StdDivisor::sample ? "sample" : "population"},
      {"alpha", format_number(c.alpha)},
      {"test", c.test_kind == LocationTestKind::welch ? "welch" : "pooled"},
      {"seed", std::to_string(c.seed)},
      {"split", c.split_fraction ? format_number(*c.split_fraction) : ""},
  };
  if (c.attack) {
    e.emplace_back("attack", to_string(c.attack->kind));
    e.emplace_back("attack_target", c.attack->target.value_or(""));
    std::string props;
    for (double p : c.attack->proportions) props += (props.empty() ? "" : ",") + format_number(p);
    e.emplace_back("attack_proportion", props);
    e.emplace_back("side_set_size", std::to_string(c.attack->side_set_size));
  }
  return e;
}

inline AttributeReport describe_attribute(const ReputationVector& c, const Dataset& ds,
                                          const std::string& attr, const std::string& stage,
                                          const ExperimentConfig& cfg) {
  AttributeReport rep;
  rep.attribute = attr;
  rep.stage = stage;
  const GroupPartition part = build_partition(ds.schema, ds.profiles, {attr}, 1);
  for (const auto& [key, users] : part.groups) {
    auto xs = reputations_of(c, users);
    if (xs.empty()) continue;
    GroupRow row;
    row.label = part.labels(ds.schema, key).front();
    row.size = xs.size();
    row.mean = mean_of(xs);
    row.std = xs.size() > 1 ? std::sqrt(sample_variance(xs, row.mean)) : 0.0;
    row.box = five_number_summary(xs);
    rep.groups.push_back(std::move(row));
  }
  std::size_t non_empty = rep.groups.size();
  if (non_empty >= 2) {
    rep.dr = dr_matrix(c, part, cfg.alpha, cfg.test_kind);
    for (const auto& key : rep.dr.classes) rep.class_labels.push_back(part.labels(ds.schema, key).front());
  }
  return rep;
}

// tau of the configured method against the plain average on the full data,
// and RMSE of r_i against held-out ratings when a split is configured.
inline QualityReport quality_eval(const Dataset& ds, const ExperimentConfig& cfg,
                                  const RankingVector& method_rankings) {
  QualityReport q;
  q.tau_vs_aa = kendall_tau(method_rankings, arithmetic_average(ds.ratings));
  if (!cfg.split_fraction) return q;

  const HoldoutSplit split =
      holdout_split(ds.ratings, *cfg.split_fraction, cfg.seed, cfg.stratified_split);
  const RankingVector train_rank =
      run_pipeline(split.train, ds.schema, ds.profiles, cfg.engine, cfg.mitigation, cfg.recenter)
          .final.rankings;
  std::vector<double> predicted, actual;
  for (const Rating& e : split.test.entries()) {
    if (!train_rank.has(e.item)) {
      ++q.test_excluded;
      continue;
    }
    predicted.push_back(train_rank[e.item]);
    actual.push_back(e.value);
  }
  q.n_test = actual.size();
  if (!actual.empty()) {
    q.rmse_test = rmse(predicted, actual);
    q.rmse_test_rescaled = *q.rmse_test * ds.ratings.max_raw_rating();
  }
  return q;
}

inline ExperimentReport run_on(const Dataset& ds, const ExperimentConfig& cfg) {
  ExperimentReport rep;
  rep.config_echo = echo_config(cfg);
  if (cfg.record_timestamps) {
    const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&now));
    rep.started_at = buf;
  }
  rep.recentring_variant = recentring_variant(cfg.recenter);

  Mitigation mitigation = cfg.mitigation;
  if (mitigation.kind == MitigationKind::multi) mitigation.min_group_size = cfg.min_group_size;
  for (const auto& a : mitigation.attributes) ds.schema.index_of(a);
  for (const auto& a : cfg.report_attributes) ds.schema.index_of(a);

  const RatingsMatrix& R = ds.ratings;
  rep.n_users = R.n_users();
  rep.n_items = R.n_items();
  rep.n_entries = R.n_entries();

  PipelineResult pipe = run_pipeline(R, ds.schema, ds.profiles, cfg.engine, mitigation, cfg.recenter);
  rep.iterations = pipe.engine.iterations;
  rep.final_delta = pipe.engine.deltas.empty() ? 0.0 : pipe.engine.deltas.back();
  rep.users_without_ratings = pipe.engine.reputations.inactive_users().size();
  rep.unranked_items = pipe.final.rankings.unrated().size();

  if (!mitigation.attributes.empty()) {
    std::vector<std::size_t> idx;
    for (const auto& a : mitigation.attributes) idx.push_back(ds.schema.index_of(a));
    for (UserIndex u = 0; u < ds.profiles.n_users(); ++u)
      if (!ds.profiles.fully_labeled(u, idx)) ++rep.unlabeled_users;
    if (rep.unlabeled_users > 0)
      rep.warnings.push_back(std::to_string(rep.unlabeled_users) +
                             " users lack a label on a mitigation attribute and were not recentred");
  }
  for (const auto& key : pipe.recenter_log.zero_spread_groups) {
    std::string label;
    for (std::size_t j = 0; j < key.size(); ++j) {
      const auto a = ds.schema.index_of(mitigation.attributes[j]);
      label += (j ? "/" : "") + ds.schema[a].classes[key[j]];
    }
    rep.warnings.push_back("group " + label + " has identical reputations; mapped to the target mean");
  }

  rep.user_ids = R.user_ids();
  rep.item_ids = R.item_ids();
  for (UserIndex u = 0; u < R.n_users(); ++u)
    rep.reputations.push_back(pipe.final.reputations.has(u)
                                  ? std::optional<double>(pipe.final.reputations[u])
                                  : std::nullopt);
  for (ItemIndex i = 0; i < R.n_items(); ++i)
    rep.rankings.push_back(pipe.final.rankings.has(i) ? std::optional<double>(pipe.final.rankings[i])
                                                      : std::nullopt);

  std::vector<std::string> attrs = cfg.report_attributes;
  if (attrs.empty())
    for (const auto& a : ds.schema.attributes()) attrs.push_back(a.name);
  for (const auto& a : attrs) {
    rep.attributes.push_back(describe_attribute(pipe.engine.reputations, ds, a, "engine", cfg));
    if (mitigation.kind != MitigationKind::none)
      rep.attributes.push_back(describe_attribute(pipe.final.reputations, ds, a, "mitigated", cfg));
  }

  rep.quality = quality_eval(ds, cfg, pipe.final.rankings);

  if (cfg.attack) {
    SweepConfig sweep;
    sweep.kinds = {cfg.attack->kind};
    sweep.proportions = cfg.attack->proportions;
    sweep.methods = {RankingMethod::average(), RankingMethod::engine()};
    if (mitigation.kind != MitigationKind::none) sweep.methods.push_back(RankingMethod::engine(mitigation));
    sweep.seeds = {cfg.seed};
    sweep.love_hate_target = cfg.attack->target;
    sweep.hate_love_target = cfg.attack->target;
    sweep.side_set_size = cfg.attack->side_set_size;
    sweep.label_attackers = cfg.attack->label_attackers;
    rep.robustness = attack_sweep(R, ds.profiles, ds.schema, cfg.engine, sweep, cfg.recenter);
  }
  return rep;
}

inline ExperimentReport run(const ExperimentConfig& cfg) { return run_on(load_dataset(cfg), cfg); }

// ---------------------------------------------------------------------------
// Serialization

inline nlohmann::ordered_json to_json(const ExperimentReport& rep) {
  using nlohmann::ordered_json;
  auto opt = [](const std::optional<double>& v) { return v ? ordered_json(*v) : ordered_json(nullptr); };

  ordered_json j;
  ordered_json meta;
  ordered_json echo = ordered_json::object();
  for (const auto& [k, v] : rep.config_echo) echo[k] = v;
  meta["config"] = echo;
  if (rep.started_at) meta["started_at"] = *rep.started_at;
  meta["recentring_variant"] = rep.recentring_variant;
  meta["n_users"] = rep.n_users;
  meta["n_items"] = rep.n_items;
  meta["n_entries"] = rep.n_entries;
  meta["iterations"] = rep.iterations;
  meta["final_delta"] = rep.final_delta;
  meta["users_without_ratings"] = rep.users_without_ratings;
  meta["unranked_items"] = rep.unranked_items;
  meta["unlabeled_users"] = rep.unlabeled_users;
  meta["warnings"] = rep.warnings;
  j["metadata"] = meta;

  ordered_json users = ordered_json::array();
  for (std::size_t u = 0; u < rep.user_ids.size(); ++u)
    users.push_back({{"user", rep.user_ids[u]}, {"reputation", opt(rep.reputations[u])}});
  j["reputations"] = users;
  ordered_json items = ordered_json::array();
  for (std::size_t i = 0; i < rep.item_ids.size(); ++i)
    items.push_back({{"item", rep.item_ids[i]}, {"ranking", opt(rep.rankings[i])}});
  j["rankings"] = items;

  ordered_json attrs = ordered_json::array();
  for (const auto& a : rep.attributes) {
    ordered_json ja;
    ja["attribute"] = a.attribute;
    ja["stage"] = a.stage;
    ordered_json groups = ordered_json::array();
    for (const auto& g : a.groups)
      groups.push_back({{"class", g.label},
                        {"size", g.size},
                        {"mean", g.mean},
                        {"std", g.std},
                        {"min", g.box.min},
                        {"q1", g.box.q1},
                        {"median", g.box.median},
                        {"q3", g.box.q3},
                        {"max", g.box.max}});
    ja["groups"] = groups;
    ordered_json cells = ordered_json::array();
    for (const auto& c : a.dr.cells) {
      const bool tested = !std::isnan(c.test.statistic);
      cells.push_back({{"class_a", a.class_labels[c.row]},
                       {"class_b", a.class_labels[c.col]},
                       {"delta", c.delta},
                       {"statistic", tested ? ordered_json(c.test.statistic) : ordered_json(nullptr)},
                       {"df", tested ? ordered_json(c.test.degrees_of_freedom) : ordered_json(nullptr)},
                       {"p_value", c.test.p_value},
                       {"reject", c.test.reject}});
    }
    ja["dr"] = {{"classes", a.class_labels}, {"cells", cells}};
    attrs.push_back(ja);
  }
  j["attributes"] = attrs;

  j["quality"] = {{"tau_vs_aa", rep.quality.tau_vs_aa},
                  {"rmse_test", opt(rep.quality.rmse_test)},
                  {"rmse_test_rescaled", opt(rep.quality.rmse_test_rescaled)},
                  {"n_test", rep.quality.n_test},
                  {"test_excluded", rep.quality.test_excluded}};

  ordered_json rows = ordered_json::array();
  for (const auto& r : rep.robustness)
    rows.push_back({{"kind", to_string(r.kind)},
                    {"proportion", r.proportion},
                    {"method", r.method},
                    {"seed", r.seed},
                    {"tau", r.tau}});
  j["robustness"] = rows;
  return j;
}

namespace detail {

inline std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char ch : s) {
    if (ch == '"') out += '"';
    out += ch;
  }
  return out + "\"";
}

inline std::string opt_number(const std::optional<double>& v) { return v ? format_number(*v) : ""; }

inline void write_file(const std::filesystem::path& p, const std::string& content) {
  std::ofstream os(p, std::ios::binary);
  if (!os) throw std::runtime_error("cannot write '" + p.string() + "'");
  os << content;
  if (!os) throw std::runtime_error("write failed for '" + p.string() + "'");
}

}  // namespace detail

// Writes `path` (JSON) or the directory `path` (CSV tables).
inline void emit_report(const ExperimentReport& rep, ReportFormat format, const std::string& path) {
  namespace fs = std::filesystem;
  if (format == ReportFormat::json) {
    detail::write_file(path, to_json(rep).dump(2) + "\n");
    return;
  }
  const fs::path dir(path);
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw std::runtime_error("cannot create '" + path + "': " + ec.message());
  using detail::csv_field;

  std::ostringstream meta;
  meta << "key,value\n";
  for (const auto& [k, v] : rep.config_echo) meta << "config." << k << ',' << csv_field(v) << '\n';
  if (rep.started_at) meta << "started_at," << *rep.started_at << '\n';
  meta << "recentring_variant," << csv_field(rep.recentring_variant) << '\n'
       << "n_users," << rep.n_users << '\n'
       << "n_items," << rep.n_items << '\n'
       << "n_entries," << rep.n_entries << '\n'
       << "iterations," << rep.iterations << '\n'
       << "final_delta," << format_number(rep.final_delta) << '\n'
       << "users_without_ratings," << rep.users_without_ratings << '\n'
       << "unranked_items," << rep.unranked_items << '\n'
       << "unlabeled_users," << rep.unlabeled_users << '\n';
  for (const auto& w : rep.warnings) meta << "warning," << csv_field(w) << '\n';
  detail::write_file(dir / "metadata.csv", meta.str());

  std::ostringstream groups;
  groups << "stage,attribute,class,size,mean,std,min,q1,median,q3,max\n";
  std::ostringstream dr;
  dr << "stage,attribute,class_a,class_b,delta,statistic,df,p_value,reject\n";
  for (const auto& a : rep.attributes) {
    for (const auto& g : a.groups)
      groups << a.stage << ',' << csv_field(a.attribute) << ',' << csv_field(g.label) << ','
             << g.size << ',' << format_number(g.mean) << ',' << format_number(g.std) << ','
             << format_number(g.box.min) << ',' << format_number(g.box.q1) << ','
             << format_number(g.box.median) << ',' << format_number(g.box.q3) << ','
             << format_number(g.box.max) << '\n';
    for (const auto& c : a.dr.cells) {
      const bool tested = !std::isnan(c.test.statistic);
      dr << a.stage << ',' << csv_field(a.attribute) << ',' << csv_field(a.class_labels[c.row])
         << ',' << csv_field(a.class_labels[c.col]) << ',' << format_number(c.delta) << ','
         << (tested ? format_number(c.test.statistic) : "") << ','
         << (tested ? format_number(c.test.degrees_of_freedom) : "") << ','
         << format_number(c.test.p_value) << ',' << (c.test.reject ? "true" : "false") << '\n';
    }
  }
  detail::write_file(dir / "group_stats.csv", groups.str());
  detail::write_file(dir / "dr_matrix.csv", dr.str());

  std::ostringstream curve;
  write_sweep_csv(curve, rep.robustness);
  detail::write_file(dir / "robustness_curve.csv", curve.str());

  std::ostringstream quality;
  quality << "metric,value\n"
          << "tau_vs_aa," << format_number(rep.quality.tau_vs_aa) << '\n'
          << "rmse_test," << detail::opt_number(rep.quality.rmse_test) << '\n'
          << "rmse_test_rescaled," << detail::opt_number(rep.quality.rmse_test_rescaled) << '\n'
          << "n_test," << rep.quality.n_test << '\n'
          << "test_excluded," << rep.quality.test_excluded << '\n';
  detail::write_file(dir / "quality.csv", quality.str());

  std::ostringstream reps;
  reps << "user,reputation\n";
  for (std::size_t u = 0; u < rep.user_ids.size(); ++u)
    reps << csv_field(rep.user_ids[u]) << ',' << detail::opt_number(rep.reputations[u]) << '\n';
  detail::write_file(dir / "reputations.csv", reps.str());

  std::ostringstream ranks;
  ranks << "item,ranking\n";
  for (std::size_t i = 0; i < rep.item_ids.size(); ++i)
    ranks << csv_field(rep.item_ids[i]) << ',' << detail::opt_number(rep.rankings[i]) << '\n';
  detail::write_file(dir / "rankings.csv", ranks.str());
}

// ---------------------------------------------------------------------------
// Config files: flat "key = value" lines; '#' starts a comment.

inline std::map<std::string, std::string> read_config_file(const std::string& path) {
  auto in = detail::open_input(path);
  std::map<std::string, std::string> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    detail::strip_cr(line);
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    const auto t = detail::trim(line);
    if (t.empty()) continue;
    const auto eq = t.find('=');
    if (eq == std::string_view::npos) throw ParseError(path, line_no, "expected key = value");
    std::string key(detail::trim(t.substr(0, eq)));
    if (key.rfind("--", 0) == 0) key.erase(0, 2);
    if (key.empty()) throw ParseError(path, line_no, "empty key");
    out[key] = std::string(detail::trim(t.substr(eq + 1)));
  }
  return out;
}

}  // namespace repfair
