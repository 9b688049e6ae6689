#include "sofa/simulation.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numeric>
#include <random>
#include <unordered_set>

#include "sofa/error.hpp"
#include "sofa/random.hpp"

namespace sofa {

namespace {

constexpr std::array<std::pair<StrategyKind, std::string_view>, 8> kStrategyNames{{
    {StrategyKind::uniform_random, "uniform_random"},
    {StrategyKind::merit_proportional, "merit_proportional"},
    {StrategyKind::preferential, "preferential"},
    {StrategyKind::predicate, "predicate"},
    {StrategyKind::cartel, "cartel"},
    {StrategyKind::explicit_plan, "explicit"},
    {StrategyKind::argmax_revision, "argmax_revision"},
    {StrategyKind::identity, "identity"},
}};

constexpr std::array<std::pair<RunMode, std::string_view>, 3> kModeNames{{
    {RunMode::per_round_stepping, "per_round_stepping"},
    {RunMode::fixed_point_per_round, "fixed_point_per_round"},
    {RunMode::two_phase, "two_phase"},
}};

}  // namespace

std::string_view to_string(StrategyKind kind) {
  for (const auto& [k, name] : kStrategyNames) {
    if (k == kind) return name;
  }
  return "?";
}

std::optional<StrategyKind> strategy_kind_from_string(std::string_view name) {
  for (const auto& [k, n] : kStrategyNames) {
    if (n == name) return k;
  }
  return std::nullopt;
}

std::string_view to_string(RunMode mode) {
  for (const auto& [m, name] : kModeNames) {
    if (m == mode) return name;
  }
  return "?";
}

std::optional<RunMode> run_mode_from_string(std::string_view name) {
  for (const auto& [m, n] : kModeNames) {
    if (n == name) return m;
  }
  return std::nullopt;
}

// ---------------------------------------------------------------------------
// Strategies

namespace {

class RowBuilder {
 public:
  RowBuilder(const ProposalContext& ctx, std::size_t donor)
      : ctx_(ctx),
        donor_(donor),
        rng_(substream(ctx.seed, ctx.community.agent(donor).id, ctx.visible.round)) {}

  bool eligible(std::size_t j) const { return j != donor_ && !ctx_.conflicts.conflicted(donor_, j); }

  /// Up to d distinct eligible recipients drawn uniformly, optionally
  /// restricted by `allowed`.
  template <typename Allowed>
  std::vector<std::size_t> uniform_candidates(std::size_t d, Allowed allowed) {
    const std::size_t n = ctx_.community.size();
    std::vector<std::size_t> picked;
    if (d == 0) return picked;
    std::uniform_int_distribution<std::size_t> any(0, n - 1);
    if (n > 8 * d) {
      for (std::size_t attempt = 0; picked.size() < d && attempt < 64 * d; ++attempt) {
        const std::size_t j = any(rng_);
        if (!eligible(j) || !allowed(j) || std::find(picked.begin(), picked.end(), j) != picked.end()) continue;
        picked.push_back(j);
      }
      if (picked.size() == d) {
        std::sort(picked.begin(), picked.end());
        return picked;
      }
      picked.clear();
    }
    std::vector<std::size_t> pool;
    for (std::size_t j = 0; j < n; ++j) {
      if (eligible(j) && allowed(j)) pool.push_back(j);
    }
    if (pool.size() <= d) return pool;
    for (std::size_t k = 0; k < d; ++k) {
      std::uniform_int_distribution<std::size_t> pick(k, pool.size() - 1);
      std::swap(pool[k], pool[pick(rng_)]);
    }
    pool.resize(d);
    std::sort(pool.begin(), pool.end());
    return pool;
  }

  std::vector<std::size_t> uniform_candidates(std::size_t d) {
    return uniform_candidates(d, [](std::size_t) { return true; });
  }

  static PlanRow uniform_row(const std::vector<std::size_t>& recipients, double mass = 1.0) {
    PlanRow row;
    for (std::size_t j : recipients) row.push_back({j, mass / static_cast<double>(recipients.size())});
    return row;
  }

  PlanRow uniform_random(std::size_t d) { return uniform_row(uniform_candidates(d)); }

  PlanRow merit_proportional(std::size_t d, const std::vector<double>& cumulative_merit) {
    const double total = cumulative_merit.empty() ? 0.0 : cumulative_merit.back();
    std::vector<std::size_t> picked;
    if (total > 0.0) {
      std::uniform_real_distribution<double> unit(0.0, total);
      for (std::size_t attempt = 0; picked.size() < d && attempt < 64 * d; ++attempt) {
        const double u = unit(rng_);
        const auto j = static_cast<std::size_t>(
            std::upper_bound(cumulative_merit.begin(), cumulative_merit.end(), u) - cumulative_merit.begin());
        if (j >= cumulative_merit.size() || !eligible(j)) continue;
        if (std::find(picked.begin(), picked.end(), j) == picked.end()) picked.push_back(j);
      }
    }
    PlanRow row;
    for (std::size_t j : picked) {
      const double m = ctx_.community.agent(j).merit;
      if (m > 0.0) row.push_back({j, m});
    }
    return row.empty() ? uniform_random(d) : row;
  }

  PlanRow preferential(std::size_t d, double alpha) {
    const auto candidates = uniform_candidates(d);
    PlanRow row;
    for (std::size_t j : candidates) {
      const double w = std::pow(ctx_.visible.prior_totals[static_cast<Eigen::Index>(j)], alpha);
      if (w > 0.0 && std::isfinite(w)) row.push_back({j, w});
    }
    return row.empty() ? uniform_row(candidates) : row;
  }

  PlanRow cartel(const Strategy& s, const std::vector<std::size_t>& members) {
    auto is_member = [&](std::size_t j) { return std::find(members.begin(), members.end(), j) != members.end(); };
    std::vector<std::size_t> inside;
    for (std::size_t j : members) {
      if (eligible(j)) inside.push_back(j);
    }
    PlanRow row;
    const double internal = inside.empty() ? 0.0 : s.internal_share;
    if (internal > 0.0) row = uniform_row(inside, internal);
    if (internal < 1.0) {
      const auto outside = uniform_candidates(s.out_degree, [&](std::size_t j) { return !is_member(j); });
      auto rest = uniform_row(outside, 1.0 - internal);
      row.insert(row.end(), rest.begin(), rest.end());
    }
    return row;
  }

  /// `by_total` lists agents by descending visible total, ties by index.
  PlanRow argmax(const std::vector<std::size_t>& by_total) const {
    for (std::size_t j : by_total) {
      if (eligible(j)) return {{j, 1.0}};
    }
    return {};
  }

  PlanRow explicit_row(const Strategy& s) const {
    PlanRow row;
    auto it = s.plan.find(ctx_.community.agent(donor_).id);
    if (it == s.plan.end()) return row;
    for (const auto& [recipient, weight] : it->second) {
      row.push_back({ctx_.community.require_index(recipient), weight});
    }
    return row;
  }

 private:
  const ProposalContext& ctx_;
  std::size_t donor_;
  std::mt19937_64 rng_;
};

struct Resolved {
  const Strategy* strategy;
  std::vector<std::size_t> members;  // cartel members, when the strategy is a cartel
};

class Proposer {
 public:
  explicit Proposer(const ProposalContext& ctx) : ctx_(ctx) {
    const auto& c = ctx.community;
    cumulative_merit_.resize(c.size());
    double running = 0.0;
    for (std::size_t j = 0; j < c.size(); ++j) {
      if (!c.agent(j).is_super_node()) running += c.agent(j).merit;
      cumulative_merit_[j] = running;
    }
    if (ctx.visible.prior_totals.size() != static_cast<Eigen::Index>(c.size())) {
      throw DimensionError("visible totals do not match the community");
    }
    if ((ctx.visible.prior_totals.array() < 0.0).any()) throw ValidationError("visible totals must be nonnegative");
    by_total_.resize(c.size());
    std::iota(by_total_.begin(), by_total_.end(), std::size_t{0});
    const auto& t = ctx.visible.prior_totals;
    std::stable_sort(by_total_.begin(), by_total_.end(), [&](std::size_t a, std::size_t b) {
      return t[static_cast<Eigen::Index>(a)] > t[static_cast<Eigen::Index>(b)];
    });
  }

  PlanRow row(const Strategy& s, std::size_t donor, const std::vector<std::size_t>& members) const {
    RowBuilder b(ctx_, donor);
    switch (s.kind) {
      case StrategyKind::uniform_random: return b.uniform_random(s.out_degree);
      case StrategyKind::merit_proportional: return b.merit_proportional(s.out_degree, cumulative_merit_);
      case StrategyKind::preferential: return b.preferential(s.out_degree, s.alpha);
      case StrategyKind::predicate:
        return predicate_plan(donor, Predicate::parse(s.predicate, ctx_.evaluation_year), ctx_.community,
                              ctx_.conflicts);
      case StrategyKind::cartel: return b.cartel(s, members);
      case StrategyKind::explicit_plan: return b.explicit_row(s);
      case StrategyKind::argmax_revision: return b.argmax(by_total_);
      case StrategyKind::identity: break;
    }
    throw ConfigError("/strategy", "'identity' is only valid as a two-phase revision strategy");
  }

  AllocationPlan finish(AllocationPlan plan) const {
    return ctx_.fallback_uniform_domain ? mask_plan_with_fallback(plan, ctx_.conflicts, ctx_.community)
                                        : mask_plan(plan, ctx_.conflicts);
  }

  const ProposalContext& context() const { return ctx_; }

 private:
  const ProposalContext& ctx_;
  std::vector<double> cumulative_merit_;
  std::vector<std::size_t> by_total_;
};

std::vector<std::size_t> member_indices(const Strategy& s, const Community& community) {
  std::vector<std::size_t> out;
  for (const auto& id : s.members) out.push_back(community.require_index(id));
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace

AllocationPlan propose_plans(const Strategy& strategy, const ProposalContext& context) {
  StrategyAssignment assignment;
  assignment.default_strategy = strategy;
  return propose_plans(assignment, context);
}

AllocationPlan propose_plans(const StrategyAssignment& assignment, const ProposalContext& context) {
  const Proposer proposer(context);
  const auto& community = context.community;

  std::vector<Resolved> chosen(community.size(), Resolved{&assignment.default_strategy, {}});
  for (std::size_t i = 0; i < community.size(); ++i) {
    for (const auto& [tag, s] : assignment.by_tag) {
      if (community.agent(i).has_tag(tag)) {
        chosen[i].strategy = &s;
        break;
      }
    }
  }
  for (const auto& cartel : assignment.cartels) {
    const auto members = member_indices(cartel, community);
    for (std::size_t i : members) chosen[i] = Resolved{&cartel, members};
  }

  AllocationPlan plan(community.size());
  for (std::size_t i = 0; i < community.size(); ++i) {
    if (community.agent(i).is_super_node()) continue;
    PlanRow row = proposer.row(*chosen[i].strategy, i, chosen[i].members);
    if (!row.empty()) plan.set_row(i, std::move(row));
  }
  // Strategies that never see conflicts (explicit, cartel core) are masked here.
  AllocationPlan masked = proposer.finish(std::move(plan));
  for (std::size_t i = 0; i < community.size(); ++i) {
    if (!community.agent(i).is_super_node() && !masked.is_donor(i) &&
        chosen[i].strategy->kind != StrategyKind::explicit_plan) {
      throw EmptyRowError(i, "strategy '" + std::string(to_string(chosen[i].strategy->kind)) +
                                 "' found no recipient for '" + community.agent(i).id + "'");
    }
  }
  return masked;
}

// ---------------------------------------------------------------------------
// Scenarios

Community build_community(const ScenarioConfig& config) {
  Community community;
  if (config.community_file) {
    community = load_community(*config.community_file);
  } else if (config.generate) {
    community = generate_community(*config.generate, config.seed);
  } else {
    throw ConfigError("/community", "needs either 'generate' or 'file'");
  }
  for (const auto& node : config.super_nodes) community = attach_super_node(community, node.id, node.domain_id);
  return community;
}

namespace {

FundingState state_from(const Vector& totals, const Vector& fractions, const Vector& base, std::size_t round) {
  FundingState s;
  s.round_index = round;
  s.base = base;
  s.incoming_total = totals;
  s.retained = retained(totals, fractions);
  s.donated_pool = fractions.cwiseProduct(totals);
  return s;
}

/// Rows of cartel members lose intra-cartel weight; rows left empty fall
/// back to uniform over non-conflicted, non-cartel domain peers.
AllocationPlan penalize(const AllocationPlan& plan, const std::vector<CartelFlag>& flags, PenaltyPolicy policy,
                        const Community& community, const ConflictSet& conflicts) {
  if (policy == PenaltyPolicy::none || flags.empty()) return plan;
  std::vector<std::size_t> flagged;
  for (const auto& f : flags) flagged.insert(flagged.end(), f.members.begin(), f.members.end());
  std::sort(flagged.begin(), flagged.end());
  flagged.erase(std::unique(flagged.begin(), flagged.end()), flagged.end());

  AllocationPlan patched = plan;
  for (;;) {
    try {
      return apply_penalties(patched, flags, policy);
    } catch (const EmptyRowError& e) {
      const std::size_t i = e.donor();
      PlanRow row;
      for (std::size_t j : community.members_of_domain(community.agent(i).domain_id)) {
        if (j != i && !conflicts.conflicted(i, j) && !std::binary_search(flagged.begin(), flagged.end(), j)) {
          row.push_back({j, 1.0});
        }
      }
      if (row.empty()) throw;
      patched.set_row(i, std::move(row));
    }
  }
}

struct PartitionRun {
  Vector fractions;
  Vector base;
  std::vector<FundingState> history;
  DonationLedger ledger;
  std::vector<FixedPointResult> fixed_points;
  std::vector<FixedPointResult> interim_points;
  std::vector<std::string> warnings;
  bool failed = false;
  std::string failure;
};

PartitionRun run_rounds(const ScenarioConfig& config, const Community& community, const PolicyConfig& policy) {
  PartitionRun run;
  run.fractions = resolve_fractions(community, policy, &run.warnings);
  const Vector q = resolve_public_preference(community, policy);
  run.base = base_vector(policy.total_budget, community, policy.public_fraction, q);
  const auto conflicts = detect_conflicts(community, policy.coi, policy.evaluation_year);
  const auto& f = run.fractions;
  const auto& beta = run.base;

  std::vector<CartelFlag> flags;
  FundingState state = initial_state(beta, f, 1);
  Vector prior = beta;

  for (std::size_t t = 1; t <= config.rounds; ++t) {
    const VisibleState visible{prior, t};
    const ProposalContext ctx{community, visible, conflicts, config.seed, policy.evaluation_year,
                              policy.coi.fallback_uniform_domain};
    AllocationPlan plan = propose_plans(config.strategy, ctx);
    plan = apply_group_multiplier(plan, community, policy.group_multipliers);
    plan = penalize(plan, flags, policy.penalty, community, conflicts);

    try {
      switch (config.mode) {
        case RunMode::per_round_stepping: {
          state.round_index = t;
          run.history.push_back(state);
          state = donation_step(state, plan, f, beta, &run.ledger);
          break;
        }
        case RunMode::fixed_point_per_round: {
          auto fp = run_fixed_point(plan, f, beta, policy.tolerance, policy.max_iter);
          if (!fp.converged) {
            run.failed = true;
            run.failure = "round " + std::to_string(t) + ": fixed point did not converge within " +
                          std::to_string(policy.max_iter) + " iterations";
            run.fixed_points.push_back(std::move(fp));
            return run;
          }
          run.history.push_back(state_from(fp.totals, f, beta, t));
          run.ledger.record_round(t, plan, f, fp.totals);
          run.fixed_points.push_back(std::move(fp));
          break;
        }
        case RunMode::two_phase: {
          const RevisionFn revise = [&](const Community& c, const Vector& interim) {
            if (config.strategy.revision.kind == StrategyKind::identity) return plan;
            const VisibleState published{interim, t};
            const ProposalContext revised{c, published, conflicts, config.seed, policy.evaluation_year,
                                          policy.coi.fallback_uniform_domain};
            StrategyAssignment phase2 = config.strategy;
            phase2.default_strategy = config.strategy.revision;
            phase2.by_tag.clear();
            AllocationPlan p = propose_plans(phase2, revised);
            p = apply_group_multiplier(p, c, policy.group_multipliers);
            return penalize(p, flags, policy.penalty, c, conflicts);
          };
          auto out = two_phase_round(community, plan, revise, f, beta, policy.tolerance, policy.max_iter);
          run.history.push_back(state_from(out.final.totals, f, beta, t));
          run.ledger.record_round(t, out.phase2_plan, f, out.final.totals);
          run.interim_points.push_back(std::move(out.interim));
          run.fixed_points.push_back(std::move(out.final));
          break;
        }
      }
    } catch (const ConvergenceError& e) {
      run.failed = true;
      run.failure = "round " + std::to_string(t) + ": " + e.what();
      return run;
    }
    prior = run.history.back().incoming_total;

    if (policy.penalty != PenaltyPolicy::none && run.ledger.round_span() >= policy.cartel.min_rounds) {
      flags = detect_cartels(run.ledger, community.size(), policy.cartel);
    }
  }
  return run;
}

void finalize(ScenarioResult& result, double budget) {
  const auto& policy = result.config.policy;
  std::size_t iterations = 0;
  double residual = 0.0;
  if (!result.fixed_points.empty()) {
    iterations = result.fixed_points.back().iterations;
    residual = result.fixed_points.back().final_residual();
  } else if (!result.history.empty()) {
    iterations = result.history.size();
    if (result.history.size() > 1) {
      const auto& a = result.history[result.history.size() - 1].incoming_total;
      const auto& b = result.history[result.history.size() - 2].incoming_total;
      residual = (a - b).lpNorm<1>() / budget;
    }
  }
  if (!result.history.empty()) {
    result.metrics = compute_metrics(result.history.back().retained, result.community, budget, iterations, residual);
  }
  const auto conflicts = detect_conflicts(result.community, policy.coi, policy.evaluation_year);
  result.integrity = audit_ledger(result.ledger, result.community.size(), conflicts, policy.cartel);
}

}  // namespace

ScenarioResult run_scenario(const ScenarioConfig& config) { return run_scenario(config, build_community(config)); }

ScenarioResult run_scenario(const ScenarioConfig& config, const Community& community) {
  if (config.rounds < 1) throw ConfigError("/rounds", "must be >= 1");
  if (auto issues = config.policy.issues(); !issues.empty()) {
    for (auto& issue : issues) issue.path = "/policy" + issue.path;
    throw ConfigError(std::move(issues));
  }

  ScenarioResult result;
  result.config = config;
  result.community = community;

  if (config.policy.domain_budgets.empty()) {
    auto run = run_rounds(config, community, config.policy);
    result.fractions = std::move(run.fractions);
    result.base = std::move(run.base);
    result.history = std::move(run.history);
    result.ledger = std::move(run.ledger);
    result.fixed_points = std::move(run.fixed_points);
    result.interim_points = std::move(run.interim_points);
    result.warnings = std::move(run.warnings);
    result.failed = run.failed;
    result.failure = std::move(run.failure);
    finalize(result, config.policy.total_budget);
    return result;
  }

  // Independent per-domain runs merged back into parent indices; agents of
  // excluded domains hold zeros.
  const auto partitions = partition_budgets(community, config.policy, config.policy.domain_budgets);
  const auto n = static_cast<Eigen::Index>(community.size());
  result.fractions = Vector::Zero(n);
  result.base = Vector::Zero(n);
  double budget = 0.0;
  std::vector<PartitionRun> runs;
  std::size_t rounds_done = config.rounds;
  for (const auto& part : partitions) {
    runs.push_back(run_rounds(config, part.community, part.policy));
    budget += part.policy.total_budget;
    rounds_done = std::min(rounds_done, runs.back().history.size());
    for (auto& w : runs.back().warnings) result.warnings.push_back(part.domain_id + ": " + w);
    if (runs.back().failed && !result.failed) {
      result.failed = true;
      result.failure = part.domain_id + ": " + runs.back().failure;
    }
  }
  for (std::size_t p = 0; p < partitions.size(); ++p) {
    const auto& map = partitions[p].parent_index;
    for (std::size_t k = 0; k < map.size(); ++k) {
      result.fractions[static_cast<Eigen::Index>(map[k])] = runs[p].fractions[static_cast<Eigen::Index>(k)];
      result.base[static_cast<Eigen::Index>(map[k])] = runs[p].base[static_cast<Eigen::Index>(k)];
    }
  }
  for (std::size_t t = 0; t < rounds_done; ++t) {
    FundingState merged;
    merged.round_index = t + 1;
    merged.base = result.base;
    merged.incoming_total = merged.retained = merged.donated_pool = Vector::Zero(n);
    FixedPointResult fp;
    fp.converged = true;
    for (std::size_t p = 0; p < partitions.size(); ++p) {
      const auto& map = partitions[p].parent_index;
      const auto& s = runs[p].history[t];
      for (std::size_t k = 0; k < map.size(); ++k) {
        const auto g = static_cast<Eigen::Index>(map[k]);
        const auto l = static_cast<Eigen::Index>(k);
        merged.incoming_total[g] = s.incoming_total[l];
        merged.retained[g] = s.retained[l];
        merged.donated_pool[g] = s.donated_pool[l];
      }
      if (t < runs[p].fixed_points.size()) {
        fp.iterations = std::max(fp.iterations, runs[p].fixed_points[t].iterations);
        fp.converged = fp.converged && runs[p].fixed_points[t].converged;
        if (fp.residual_history.empty() || runs[p].fixed_points[t].final_residual() > fp.residual_history.back()) {
          fp.residual_history = {runs[p].fixed_points[t].final_residual()};
        }
      }
    }
    fp.totals = merged.incoming_total;
    fp.retained = merged.retained;
    if (config.mode != RunMode::per_round_stepping) result.fixed_points.push_back(std::move(fp));
    result.history.push_back(std::move(merged));
  }
  for (std::size_t p = 0; p < partitions.size(); ++p) {
    const auto& map = partitions[p].parent_index;
    for (auto t : runs[p].ledger.records()) {
      t.donor = map[t.donor];
      t.recipient = map[t.recipient];
      result.ledger.add(t);
    }
  }
  finalize(result, budget);
  return result;
}

std::vector<SweepPoint> sweep(const ScenarioConfig& base_config, std::span<const double> fractions) {
  if (fractions.empty()) throw ConfigError("/f_values", "must not be empty");
  std::vector<ConfigIssue> issues;
  for (std::size_t k = 0; k < fractions.size(); ++k) {
    if (!(fractions[k] >= 0.0 && fractions[k] < 1.0)) {
      issues.push_back({"/f_values/" + std::to_string(k), "must be >= 0 and < 1"});
    }
  }
  if (!issues.empty()) throw ConfigError(std::move(issues));

  const Community community = build_community(base_config);
  std::vector<SweepPoint> out;
  for (double f : fractions) {
    SweepPoint point;
    point.fraction = f;
    try {
      ScenarioConfig config = base_config;
      config.policy.default_fraction = f;
      auto result = run_scenario(config, community);
      if (result.failed) {
        point.error = result.failure;
      } else {
        point.metrics = std::move(result.metrics);
      }
    } catch (const Error& e) {
      point.error = e.what();
    }
    out.push_back(std::move(point));
  }
  return out;
}

}  // namespace sofa
