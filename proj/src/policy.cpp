#include "sofa/policy.hpp"

#include <cmath>
#include <utility>

#include "sofa/error.hpp"

namespace sofa {

std::vector<ConfigIssue> PolicyConfig::issues() const {
  std::vector<ConfigIssue> out;
  auto check_fraction = [&](double f, const std::string& path) {
    if (!(f < 1.0)) {
      out.push_back({path, "must be < 1"});
    } else if (!(f >= 0.0)) {
      out.push_back({path, "must be >= 0"});
    }
  };
  if (!(total_budget > 0.0) || !std::isfinite(total_budget)) out.push_back({"/total_budget", "must be > 0"});
  check_fraction(default_fraction, "/default_fraction");
  for (std::size_t i = 0; i < fraction_overrides.size(); ++i) {
    check_fraction(fraction_overrides[i].fraction, "/fraction_overrides/" + std::to_string(i) + "/fraction");
  }
  for (const auto& [tag, m] : group_multipliers) {
    if (!(m > 0.0) || !std::isfinite(m)) out.push_back({"/group_multipliers/" + tag, "must be > 0"});
  }
  if (!(public_fraction >= 0.0 && public_fraction <= 1.0)) out.push_back({"/public_fraction", "must be in [0,1]"});
  if (!public_pref.empty()) {
    double mass = 0.0;
    for (const auto& [id, q] : public_pref) {
      if (!(q >= 0.0)) out.push_back({"/public_pref/" + id, "must be >= 0"});
      mass += q;
    }
    if (std::abs(mass - 1.0) > 1e-9) out.push_back({"/public_pref", "must sum to 1"});
  }
  if (!(tolerance > 0.0)) out.push_back({"/tolerance", "must be > 0"});
  if (max_iter < 1) out.push_back({"/max_iter", "must be >= 1"});
  if (coi.coauthor_window_years < 0) out.push_back({"/coi/coauthor_window_years", "must be >= 0"});
  if (!(cartel.pair_reciprocity > 0.0 && cartel.pair_reciprocity <= 1.0)) {
    out.push_back({"/cartel/pair_reciprocity", "must be in (0,1]"});
  }
  if (!(cartel.internal_share > 0.0 && cartel.internal_share <= 1.0)) {
    out.push_back({"/cartel/internal_share", "must be in (0,1]"});
  }
  if (cartel.max_group_size < 2) out.push_back({"/cartel/max_group_size", "must be >= 2"});
  if (cartel.min_rounds < 1) out.push_back({"/cartel/min_rounds", "must be >= 1"});
  for (const auto& [domain, budget] : domain_budgets) {
    if (!(budget > 0.0) || !std::isfinite(budget)) out.push_back({"/domain_budgets/" + domain, "must be > 0"});
  }
  return out;
}

Vector resolve_fractions(const Community& community, const PolicyConfig& policy, std::vector<std::string>* warnings) {
  if (warnings) {
    for (const auto& o : policy.fraction_overrides) {
      bool seen = false;
      for (const auto& a : community.agents()) seen = seen || a.has_tag(o.tag);
      if (!seen) warnings->push_back("fraction override tag '" + o.tag + "' matches no agent");
    }
  }
  Vector f(static_cast<Eigen::Index>(community.size()));
  std::vector<std::string> bad;
  for (std::size_t i = 0; i < community.size(); ++i) {
    const Agent& a = community.agent(i);
    double value = policy.default_fraction;
    if (a.is_super_node()) {
      value = 0.0;
    } else if (a.fraction_override) {
      value = *a.fraction_override;
    } else {
      for (const auto& o : policy.fraction_overrides) {
        if (a.has_tag(o.tag)) {
          value = o.fraction;
          break;
        }
      }
    }
    if (!(value >= 0.0 && value < 1.0)) bad.push_back(a.id);
    f[static_cast<Eigen::Index>(i)] = value;
  }
  if (!bad.empty()) throw ValidationError("resolved donation fractions must lie in [0,1)", bad);
  return f;
}

Vector resolve_public_preference(const Community& community, const PolicyConfig& policy) {
  if (policy.public_pref.empty()) {
    Vector q = Vector::Zero(static_cast<Eigen::Index>(community.size()));
    const auto ns = community.scientist_count();
    for (std::size_t i = 0; i < community.size(); ++i) {
      if (!community.agent(i).is_super_node()) q[static_cast<Eigen::Index>(i)] = 1.0 / static_cast<double>(ns);
    }
    return q;
  }
  std::vector<ConfigIssue> issues;
  Vector q = Vector::Zero(static_cast<Eigen::Index>(community.size()));
  for (const auto& [id, weight] : policy.public_pref) {
    const auto idx = community.index_of(id);
    if (!idx) {
      issues.push_back({"/policy/public_pref/" + id, "unknown agent"});
    } else if (community.agent(*idx).is_super_node()) {
      issues.push_back({"/policy/public_pref/" + id, "super-nodes cannot receive public funds"});
    } else {
      q[static_cast<Eigen::Index>(*idx)] = weight;
    }
  }
  if (!issues.empty()) throw ConfigError(std::move(issues));
  return q;
}

double tag_multiplier(const Agent& agent, const std::map<std::string, double>& multipliers) {
  double m = 1.0;
  for (const auto& tag : agent.group_tags) {
    if (auto it = multipliers.find(tag); it != multipliers.end()) m *= it->second;
  }
  return m;
}

AllocationPlan apply_group_multiplier(const AllocationPlan& plan, const Community& community,
                                      const std::map<std::string, double>& multipliers) {
  if (plan.size() != community.size()) throw DimensionError("plan and community sizes differ");
  for (const auto& [tag, m] : multipliers) {
    if (!(m > 0.0) || !std::isfinite(m)) throw ValidationError("group multipliers must be positive", {tag});
  }
  if (multipliers.empty()) return plan;

  std::vector<double> factor(community.size());
  for (std::size_t j = 0; j < community.size(); ++j) factor[j] = tag_multiplier(community.agent(j), multipliers);

  AllocationPlan out(plan.size());
  for (std::size_t i = 0; i < plan.size(); ++i) {
    if (!plan.is_donor(i)) continue;
    PlanRow row = plan.row(i);
    for (auto& e : row) e.weight *= factor[e.recipient];
    out.set_row(i, std::move(row));
  }
  return out;
}

// ---------------------------------------------------------------------------

bool Predicate::matches(const Agent& agent) const {
  switch (kind) {
    case Kind::tag: return agent.has_tag(value);
    case Kind::age_below: return evaluation_year - agent.birth_year < age_limit;
    case Kind::domain: return agent.domain_id == value;
  }
  return false;
}

std::string Predicate::describe() const {
  switch (kind) {
    case Kind::tag: return "tag=" + value;
    case Kind::age_below: return "age<" + std::to_string(age_limit);
    case Kind::domain: return "domain=" + value;
  }
  return {};
}

Predicate Predicate::parse(const std::string& text, int evaluation_year) {
  Predicate p;
  p.evaluation_year = evaluation_year;
  if (text.rfind("age<", 0) == 0) {
    p.kind = Kind::age_below;
    try {
      std::size_t used = 0;
      p.age_limit = std::stoi(text.substr(4), &used);
      if (used != text.size() - 4) throw std::invalid_argument(text);
    } catch (const std::exception&) {
      throw ConfigError("", "bad age predicate '" + text + "'");
    }
    return p;
  }
  const auto eq = text.find('=');
  if (eq == std::string::npos || eq + 1 == text.size()) {
    throw ConfigError("", "predicate must be tag=<label>, domain=<id> or age<<years>, got '" + text + "'");
  }
  const std::string key = text.substr(0, eq);
  p.value = text.substr(eq + 1);
  if (key == "tag") {
    p.kind = Kind::tag;
  } else if (key == "domain") {
    p.kind = Kind::domain;
  } else {
    throw ConfigError("", "unknown predicate key '" + key + "'");
  }
  return p;
}

PlanRow predicate_plan(std::size_t donor, const Predicate& predicate, const Community& community,
                       const ConflictSet& conflicts) {
  PlanRow row;
  for (std::size_t j = 0; j < community.size(); ++j) {
    const Agent& a = community.agent(j);
    if (j == donor || a.is_super_node() || conflicts.conflicted(donor, j) || !predicate.matches(a)) continue;
    row.push_back({j, 1.0});
  }
  if (row.empty()) {
    throw EmptyTargetError("predicate '" + predicate.describe() + "' selects no eligible recipient for '" +
                           community.agent(donor).id + "'");
  }
  const double w = 1.0 / static_cast<double>(row.size());
  for (auto& e : row) e.weight = w;
  return row;
}

Community attach_super_node(const Community& community, const std::string& name, const std::string& domain_id) {
  if (community.index_of(name)) throw ValidationError("agent id already in use", {name});
  std::vector<Agent> agents = community.agents();
  Agent node;
  node.id = name;
  node.kind = AgentKind::super_node;
  node.domain_id = domain_id;
  agents.push_back(std::move(node));
  return Community(std::move(agents), community.coauthor_edges());
}

std::vector<BudgetPartition> partition_budgets(const Community& community, const PolicyConfig& policy,
                                               const std::map<std::string, double>& domain_budgets) {
  std::vector<ConfigIssue> issues;
  const auto domains = community.domains();
  for (const auto& [domain, budget] : domain_budgets) {
    const auto members = community.members_of_domain(domain);
    std::size_t scientists = 0;
    for (auto i : members) scientists += community.agent(i).is_super_node() ? 0 : 1;
    if (scientists == 0) issues.push_back({"/policy/domain_budgets/" + domain, "domain has no scientists"});
    if (!(budget > 0.0)) issues.push_back({"/policy/domain_budgets/" + domain, "must be > 0"});
  }
  for (const auto& d : domains) {
    if (!domain_budgets.count(d) && !policy.excluded_domains.count(d)) {
      issues.push_back({"/policy/domain_budgets/" + d, "populated domain has no budget"});
    }
  }
  if (!issues.empty()) throw ConfigError(std::move(issues));

  std::vector<BudgetPartition> out;
  for (const auto& [domain, budget] : domain_budgets) {
    BudgetPartition part;
    part.domain_id = domain;
    part.parent_index = community.members_of_domain(domain);
    std::vector<std::size_t> local(community.size(), static_cast<std::size_t>(-1));
    std::vector<Agent> agents;
    for (std::size_t k = 0; k < part.parent_index.size(); ++k) {
      local[part.parent_index[k]] = k;
      agents.push_back(community.agent(part.parent_index[k]));
    }
    std::vector<CoauthorEdge> edges;
    for (const auto& e : community.coauthor_edges()) {
      if (local[e.a] != static_cast<std::size_t>(-1) && local[e.b] != static_cast<std::size_t>(-1)) {
        edges.push_back({local[e.a], local[e.b], e.last_year});
      }
    }
    part.community = Community(std::move(agents), std::move(edges));

    part.policy = policy;
    part.policy.total_budget = budget;
    part.policy.domain_budgets.clear();
    part.policy.excluded_domains.clear();
    if (!policy.public_pref.empty()) {
      std::map<std::string, double> restricted;
      double mass = 0.0;
      for (const auto& [id, q] : policy.public_pref) {
        if (part.community.index_of(id)) {
          restricted[id] = q;
          mass += q;
        }
      }
      if (mass > 0.0) {
        for (auto& [id, q] : restricted) q /= mass;
      }
      part.policy.public_pref = std::move(restricted);
    }
    out.push_back(std::move(part));
  }
  return out;
}

}  // namespace sofa
