#pragma once

// Ranking method = engine (or plain average) followed by an optional
// mitigation step. Shared by the attack simulator and the experiment runner.

#include <string>
#include <vector>

#include "repfair/core_model.hpp"
#include "repfair/errors.hpp"
#include "repfair/independence.hpp"
#include "repfair/reputation_engine.hpp"

namespace repfair {

enum class MitigationKind { none, single, sequential, multi };

struct Mitigation {
  MitigationKind kind = MitigationKind::none;
  std::vector<std::string> attributes;
  std::size_t min_group_size = 1;

  static Mitigation none() { return {}; }
  static Mitigation single(std::string attr) { return {MitigationKind::single, {std::move(attr)}, 1}; }
  static Mitigation sequential(std::vector<std::string> attrs) {
    return {MitigationKind::sequential, std::move(attrs), 1};
  }
  static Mitigation multi(std::vector<std::string> attrs, std::size_t min_group_size = 1) {
    return {MitigationKind::multi, std::move(attrs), min_group_size};
  }

  // "none", "single:gender", "sequential:gender,age", "multi:gender,age"
  static Mitigation parse(const std::string& text) {
    const auto colon = text.find(':');
    const std::string head = text.substr(0, colon);
    std::vector<std::string> attrs;
    if (colon != std::string::npos) {
      std::string rest = text.substr(colon + 1);
      std::size_t start = 0;
      while (start <= rest.size()) {
        const auto comma = rest.find(',', start);
        const std::string a = rest.substr(start, comma == std::string::npos ? std::string::npos
                                                                            : comma - start);
        if (!a.empty()) attrs.push_back(a);
        if (comma == std::string::npos) break;
        start = comma + 1;
      }
    }
    if (head == "none" && attrs.empty()) return none();
    if (head == "single" && attrs.size() == 1) return single(attrs[0]);
    if (head == "sequential" && !attrs.empty()) return sequential(attrs);
    if (head == "multi" && !attrs.empty()) return multi(attrs);
    throw InputError("bad mitigation '" + text +
                     "' (expected none | single:<attr> | sequential:<a,b> | multi:<a,b>)");
  }

  std::string to_string() const {
    static const char* names[] = {"none", "single", "sequential", "multi"};
    std::string s = names[static_cast<int>(kind)];
    for (std::size_t k = 0; k < attributes.size(); ++k) s += (k == 0 ? ":" : ",") + attributes[k];
    return s;
  }
};

struct PipelineResult {
  EngineResult engine;      // unmitigated fixed point
  FairResult final;         // after mitigation (equal to engine output for none)
  RecenterLog recenter_log;
};

inline PipelineResult run_pipeline(const RatingsMatrix& R, const AttributeSchema& schema,
                                   const UserProfiles& profiles, const EngineConfig& cfg,
                                   const Mitigation& mitigation,
                                   const RecenterOptions& opts = {}) {
  PipelineResult out;
  out.engine = compute(R, cfg);
  const ReputationVector& c = out.engine.reputations;
  switch (mitigation.kind) {
    case MitigationKind::none:
      out.final = {c, out.engine.rankings};
      break;
    case MitigationKind::single:
      out.final = single_fair(R, c, schema, profiles, mitigation.attributes.at(0), opts,
                              &out.recenter_log);
      break;
    case MitigationKind::sequential:
      out.final = sequential_fair(R, c, schema, profiles, mitigation.attributes, opts);
      break;
    case MitigationKind::multi:
      out.final = multi_fair(R, c, schema, profiles, mitigation.attributes,
                             mitigation.min_group_size, opts, &out.recenter_log);
      break;
  }
  return out;
}

// A named way of producing item rankings: the plain average, or the
// reputation engine with a mitigation.
struct RankingMethod {
  std::string name;
  bool reputation = true;
  Mitigation mitigation;

  static RankingMethod average() { return {"aa", false, {}}; }
  static RankingMethod engine(Mitigation m = {}) {
    return {m.kind == MitigationKind::none ? "reputation" : "reputation+" + m.to_string(), true,
            std::move(m)};
  }
};

inline RankingVector rank_with(const RatingsMatrix& R, const AttributeSchema& schema,
                               const UserProfiles& profiles, const EngineConfig& cfg,
                               const RankingMethod& method, const RecenterOptions& opts = {}) {
  if (!method.reputation) return arithmetic_average(R);
  return run_pipeline(R, schema, profiles, cfg, method.mitigation, opts).final.rankings;
}

}  // namespace repfair
