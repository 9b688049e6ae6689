#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "sofa/integrity.hpp"
#include "sofa/ledger.hpp"
#include "sofa/mechanism.hpp"
#include "sofa/metrics.hpp"
#include "sofa/policy.hpp"
#include "sofa/population.hpp"

namespace sofa {

enum class StrategyKind {
  uniform_random,
  merit_proportional,
  preferential,
  predicate,
  cartel,
  explicit_plan,
  argmax_revision,
  identity,
};

std::string_view to_string(StrategyKind kind);
std::optional<StrategyKind> strategy_kind_from_string(std::string_view name);

/// How a donor splits its pool. Only the fields of the chosen kind are read.
struct Strategy {
  StrategyKind kind = StrategyKind::uniform_random;
  std::size_t out_degree = 10;
  /// preferential: weight proportional to prior_total^alpha.
  double alpha = 1.0;
  /// predicate: "tag=<label>", "domain=<id>" or "age<<years>".
  std::string predicate;
  /// cartel: colluding member ids and the pool share routed among them.
  std::vector<std::string> members;
  double internal_share = 0.9;
  /// explicit_plan: donor id -> (recipient id -> weight).
  std::map<std::string, std::map<std::string, double>> plan;

  friend bool operator==(const Strategy&, const Strategy&) = default;
};

inline Strategy identity_strategy() {
  Strategy s;
  s.kind = StrategyKind::identity;
  return s;
}

struct StrategyAssignment {
  Strategy default_strategy;
  /// First matching tag wins.
  std::vector<std::pair<std::string, Strategy>> by_tag;
  /// Members of each cartel follow it regardless of tags.
  std::vector<Strategy> cartels;
  /// Phase-2 behaviour in two_phase mode.
  Strategy revision = identity_strategy();

  friend bool operator==(const StrategyAssignment&, const StrategyAssignment&) = default;
};

/// What a donor may see when choosing: published totals of the previous
/// round, never other donors' pending plans.
struct VisibleState {
  Vector prior_totals;
  std::size_t round = 1;
};

struct ProposalContext {
  const Community& community;
  const VisibleState& visible;
  const ConflictSet& conflicts;
  std::uint64_t seed = 0;
  int evaluation_year = 2024;
  bool fallback_uniform_domain = true;
};

/// One strategy for every scientist; super-nodes get empty rows. Rows are
/// masked against conflicts and normalized. Deterministic in all inputs:
/// each donor draws from its own (seed, id, round) substream.
AllocationPlan propose_plans(const Strategy& strategy, const ProposalContext& context);
AllocationPlan propose_plans(const StrategyAssignment& assignment, const ProposalContext& context);

enum class RunMode { per_round_stepping, fixed_point_per_round, two_phase };

std::string_view to_string(RunMode mode);
std::optional<RunMode> run_mode_from_string(std::string_view name);

struct SuperNodeSpec {
  std::string id;
  std::string domain_id;

  friend bool operator==(const SuperNodeSpec&, const SuperNodeSpec&) = default;
};

struct ScenarioConfig {
  int schema_version = 1;
  std::uint64_t seed = 1;
  std::size_t rounds = 1;
  RunMode mode = RunMode::fixed_point_per_round;
  /// Exactly one source: a generator spec or a community file.
  std::optional<CommunitySpec> generate = CommunitySpec{};
  std::optional<std::filesystem::path> community_file;
  std::vector<SuperNodeSpec> super_nodes;
  PolicyConfig policy;
  StrategyAssignment strategy;
  std::filesystem::path output_dir = "out";

  friend bool operator==(const ScenarioConfig&, const ScenarioConfig&) = default;
};

struct ScenarioResult {
  ScenarioConfig config;
  Community community;
  Vector fractions;
  Vector base;
  std::vector<FundingState> history;
  DonationLedger ledger;
  /// Converged (or final-phase) fixed point per round, where applicable.
  std::vector<FixedPointResult> fixed_points;
  /// Phase-1 results in two_phase mode.
  std::vector<FixedPointResult> interim_points;
  MetricsReport metrics;
  IntegrityReport integrity;
  std::vector<std::string> warnings;
  bool failed = false;
  std::string failure;
};

/// Generates or loads the community and attaches configured super-nodes.
Community build_community(const ScenarioConfig& config);

ScenarioResult run_scenario(const ScenarioConfig& config);
ScenarioResult run_scenario(const ScenarioConfig& config, const Community& community);

struct SweepPoint {
  double fraction = 0.0;
  std::optional<MetricsReport> metrics;
  std::string error;
};

/// One scenario per default fraction over the same community and seed;
/// failures are collected per point.
std::vector<SweepPoint> sweep(const ScenarioConfig& base_config, std::span<const double> fractions);

}  // namespace sofa
