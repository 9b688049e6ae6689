#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "sofa/error.hpp"
#include "sofa/integrity.hpp"
#include "sofa/plan.hpp"
#include "sofa/population.hpp"
#include "sofa/types.hpp"

namespace sofa {

struct FractionOverride {
  std::string tag;
  double fraction = 0.0;

  friend bool operator==(const FractionOverride&, const FractionOverride&) = default;
};

struct PolicyConfig {
  double total_budget = 1'000'000.0;
  double default_fraction = 0.5;
  /// Checked in declared order; the first matching tag wins.
  std::vector<FractionOverride> fraction_overrides;
  /// Recipient-side weight multipliers, composed multiplicatively.
  std::map<std::string, double> group_multipliers;
  double public_fraction = 0.0;
  /// Agent id -> preference mass. Empty means uniform over scientists.
  std::map<std::string, double> public_pref;
  double tolerance = 1e-9;
  std::size_t max_iter = 10'000;
  int evaluation_year = 2024;
  CoiRules coi;
  CartelThresholds cartel;
  PenaltyPolicy penalty = PenaltyPolicy::none;
  /// Non-empty: run one independent scenario per domain.
  std::map<std::string, double> domain_budgets;
  std::set<std::string> excluded_domains;

  /// Every violated invariant, as (json pointer under /policy, message).
  std::vector<ConfigIssue> issues() const;

  friend bool operator==(const PolicyConfig&, const PolicyConfig&) = default;
};

/// f_i per agent: agent override, else first matching group override, else
/// the default; super-nodes always 0. Unknown override tags are appended to
/// `warnings` when given.
Vector resolve_fractions(const Community& community, const PolicyConfig& policy,
                         std::vector<std::string>* warnings = nullptr);

/// q over agents from policy.public_pref (uniform when empty).
Vector resolve_public_preference(const Community& community, const PolicyConfig& policy);

/// Product of the multipliers of every tag the agent carries (1 if none).
double tag_multiplier(const Agent& agent, const std::map<std::string, double>& multipliers);

/// w'_ij = w_ij m(j) / sum_k w_ik m(k).
AllocationPlan apply_group_multiplier(const AllocationPlan& plan, const Community& community,
                                      const std::map<std::string, double>& multipliers);

/// Recipient filter for "give equally to everyone who ..." options.
struct Predicate {
  enum class Kind { tag, age_below, domain };

  Kind kind = Kind::tag;
  std::string value;  // tag label or domain id
  int age_limit = 0;
  int evaluation_year = 2024;

  bool matches(const Agent& agent) const;
  std::string describe() const;

  /// "tag=female", "age<30", "domain=chem".
  static Predicate parse(const std::string& text, int evaluation_year);

  friend bool operator==(const Predicate&, const Predicate&) = default;
};

/// Uniform row over scientists matching the predicate, minus the donor and
/// its conflicts. Throws EmptyTargetError when nobody qualifies.
PlanRow predicate_plan(std::size_t donor, const Predicate& predicate, const Community& community,
                       const ConflictSet& conflicts);

/// Adds a super-node (no base share, never donates). Throws ValidationError
/// on duplicate id.
Community attach_super_node(const Community& community, const std::string& name, const std::string& domain_id);

struct BudgetPartition {
  std::string domain_id;
  Community community;
  PolicyConfig policy;
  /// Index in the parent community of each partition agent.
  std::vector<std::size_t> parent_index;
};

/// One independent scenario per budgeted domain, sorted by domain id.
/// Throws ConfigError for budgets on unknown/empty domains and for populated
/// domains that are neither budgeted nor excluded.
std::vector<BudgetPartition> partition_budgets(const Community& community, const PolicyConfig& policy,
                                               const std::map<std::string, double>& domain_budgets);

}  // namespace sofa
