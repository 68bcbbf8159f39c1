// repfair: run a reputation-ranking experiment and write its report.
//
//   repfair --dataset inline --ratings data/example1/ratings.csv
//           --users data/example1/attributes.csv --iterations 8
//           --mitigation multi:Gender,Age --out report.json
//
// Any long flag may also come from a --config file of "key = value" lines;
// the command line wins.

#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "repfair/repfair.hpp"

namespace {

struct CliValues {
  std::string config;
  std::string dataset = "inline";
  std::string ratings, users, continent_table;
  double max_rating = 1.0;
  double lambda = 0.5;
  std::size_t iterations = 0;
  std::size_t max_iterations = 100;
  double tol = 1e-9;
  std::string mitigation = "none";
  std::vector<std::string> attributes;
  std::vector<std::string> report_attributes;
  std::size_t min_group_size = 1;
  std::string targets = "min";
  std::string std_divisor = "sample";
  std::string attack;
  std::string attack_target;
  std::vector<double> attack_proportions;
  std::size_t side_set_size = 10;
  bool unlabeled_attackers = false;
  double split = 0.0;
  bool stratified = false;
  double alpha = 0.05;
  std::string test = "welch";
  std::uint64_t seed = 42;
  bool timestamps = false;
  std::string out;
  std::string format = "json";
};

void define(CLI::App& app, CliValues& v) {
  app.add_option("--config", v.config, "flat key = value file supplying any long flag");
  app.add_option("--dataset", v.dataset, "movielens | bookcrossing | inline");
  app.add_option("--ratings", v.ratings, "ratings file (inline: dense CSV matrix)");
  app.add_option("--users", v.users, "users / attributes file");
  app.add_option("--continent-table", v.continent_table, "country,continent table (bookcrossing)");
  app.add_option("--max-rating", v.max_rating, "normalization divisor for inline data");
  app.add_option("--lambda", v.lambda, "discordance penalty in ]0,1[");
  app.add_option("--iterations", v.iterations, "run exactly N iterations (overrides --tol)");
  app.add_option("--max-iterations", v.max_iterations, "iteration cap in tolerance mode");
  app.add_option("--tol", v.tol, "stop when max reputation change falls below this");
  app.add_option("--mitigation", v.mitigation,
                 "none | single[:attr] | sequential[:a,b] | multi[:a,b]");
  app.add_option("--attributes", v.attributes, "mitigation attributes (comma separated)")
      ->delimiter(',');
  app.add_option("--report-attributes", v.report_attributes,
                 "attributes with DR tables (default: all)")
      ->delimiter(',');
  app.add_option("--min-group-size", v.min_group_size, "drop k-tuple groups smaller than this");
  app.add_option("--targets", v.targets, "recentring targets: min | global");
  app.add_option("--std", v.std_divisor, "group std divisor: sample | population");
  app.add_option("--attack", v.attack, "random_spam | love_hate | hate_love");
  app.add_option("--attack-target", v.attack_target, "target item id (default: most rated)");
  app.add_option("--attack-proportion", v.attack_proportions, "proportion grid (comma separated)")
      ->delimiter(',');
  app.add_option("--side-set-size", v.side_set_size, "random items per attacker");
  app.add_flag("--unlabeled-attackers", v.unlabeled_attackers,
               "keep attackers out of demographic partitions");
  app.add_option("--split", v.split, "held-out fraction for RMSE, e.g. 0.1");
  app.add_flag("--stratified-split", v.stratified, "hold out the fraction per user");
  app.add_option("--alpha", v.alpha, "location test level");
  app.add_option("--test", v.test, "location test: welch | pooled");
  app.add_option("--seed", v.seed, "seed for splits and attacks");
  app.add_flag("--timestamps", v.timestamps, "record wall-clock start time in the report");
  app.add_option("--out", v.out, "report path (json file or csv directory; default stdout)");
  app.add_option("--format", v.format, "json | csv-bundle");
}

repfair::ExperimentConfig to_config(const CliValues& v) {
  using namespace repfair;
  ExperimentConfig c;
  c.dataset = parse_dataset_kind(v.dataset);
  c.ratings_path = v.ratings;
  c.users_path = v.users;
  c.continent_table_path = v.continent_table;
  c.max_rating = v.max_rating;
  if (c.ratings_path.empty() || c.users_path.empty())
    throw InputError("--ratings and --users are required");

  c.engine.lambda = v.lambda;
  if (v.iterations > 0) {
    c.engine = EngineConfig::fixed_iterations(v.iterations, v.lambda);
  } else {
    c.engine.max_iterations = v.max_iterations;
    c.engine.convergence_tol = v.tol;
  }
  c.engine.validate();

  std::string mit = v.mitigation;
  if (mit.find(':') == std::string::npos && mit != "none" && !v.attributes.empty()) {
    for (std::size_t k = 0; k < v.attributes.size(); ++k) mit += (k ? "," : ":") + v.attributes[k];
  }
  c.mitigation = Mitigation::parse(mit);
  c.min_group_size = v.min_group_size;
  c.report_attributes = v.report_attributes;

  if (v.targets == "min") c.recenter.target = TargetRule::min_of_groups;
  else if (v.targets == "global") c.recenter.target = TargetRule::global;
  else throw InputError("--targets must be min or global");
  if (v.std_divisor == "sample") c.recenter.divisor = StdDivisor::sample;
  else if (v.std_divisor == "population") c.recenter.divisor = StdDivisor::population;
  else throw InputError("--std must be sample or population");

  if (!v.attack.empty()) {
    AttackConfig a;
    a.kind = parse_attack_kind(v.attack);
    if (!v.attack_target.empty()) a.target = v.attack_target;
    if (!v.attack_proportions.empty()) a.proportions = v.attack_proportions;
    a.side_set_size = v.side_set_size;
    a.label_attackers = !v.unlabeled_attackers;
    c.attack = a;
  }
  if (v.split > 0.0) c.split_fraction = v.split;
  c.stratified_split = v.stratified;
  c.alpha = v.alpha;
  if (v.test == "welch") c.test_kind = LocationTestKind::welch;
  else if (v.test == "pooled") c.test_kind = LocationTestKind::pooled;
  else throw InputError("--test must be welch or pooled");
  c.seed = v.seed;
  c.record_timestamps = v.timestamps;
  c.out_path = v.out;
  c.format = parse_report_format(v.format);
  return c;
}

const char* module_of(const std::exception& e) {
  if (dynamic_cast<const repfair::ParseError*>(&e)) return "data-ingest";
  if (dynamic_cast<const repfair::SchemaError*>(&e)) return "core-model";
  if (dynamic_cast<const repfair::ContractError*>(&e)) return "engine";
  if (dynamic_cast<const repfair::InputError*>(&e)) return "input";
  return "io";
}

}  // namespace

int main(int argc, char** argv) {
  // First pass only to learn which flags were given and where the config is.
  CliValues first;
  CLI::App probe{"repfair"};
  define(probe, first);
  try {
    probe.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return probe.exit(e);
  }

  std::vector<std::string> args;
  args.push_back(argv[0]);
  if (!first.config.empty()) {
    try {
      for (const auto& [key, value] : repfair::read_config_file(first.config)) {
        CLI::Option* opt = probe.get_option_no_throw("--" + key);
        if (!opt || key == "config") {
          std::cerr << "error [config]: unknown key '" << key << "' in " << first.config << "\n";
          return 2;
        }
        if (opt->count() > 0) continue;
        if (opt->get_expected_min() == 0) {
          if (value == "true" || value == "1") args.push_back("--" + key);
        } else {
          args.push_back("--" + key + "=" + value);
        }
      }
    } catch (const std::exception& e) {
      std::cerr << "error [config]: " << e.what() << "\n";
      return 2;
    }
  }
  for (int k = 1; k < argc; ++k) args.emplace_back(argv[k]);

  CliValues values;
  CLI::App app{"Reputation-based ranking with demographic reputation independence"};
  define(app, values);
  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend() - 1);
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  try {
    const repfair::ExperimentConfig cfg = to_config(values);
    const repfair::ExperimentReport report = repfair::run(cfg);
    if (cfg.out_path.empty()) {
      if (cfg.format != repfair::ReportFormat::json)
        throw repfair::InputError("csv-bundle output needs --out <directory>");
      std::cout << repfair::to_json(report).dump(2) << "\n";
    } else {
      repfair::emit_report(report, cfg.format, cfg.out_path);
    }
  } catch (const std::exception& e) {
    std::cerr << "error [" << module_of(e) << "]: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
