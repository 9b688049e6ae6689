#include "sofa/integrity.hpp"

#include <algorithm>
#include <cstdint>
#include <functional>
#include <unordered_map>
#include <map>
#include <string>
#include <unordered_set>

#include "sofa/error.hpp"
#include "sofa/graph.hpp"

namespace sofa {

// ---------------------------------------------------------------------------
// Conflicts

void ConflictSet::add(std::size_t a, std::size_t b, unsigned reasons) {
  if (a >= n_ || b >= n_) throw DimensionError("conflict pair out of range");
  if (a == b) throw ValidationError("conflict pairs must join two distinct agents");
  if (reasons == 0) return;
  if (a > b) std::swap(a, b);
  explicit_[key(a, b)] |= reasons;
}

void ConflictSet::set_affiliations(std::vector<std::vector<std::uint32_t>> codes) {
  if (codes.size() != n_) throw DimensionError("affiliation codes must cover every agent");
  for (auto& c : codes) std::sort(c.begin(), c.end());
  affiliations_ = std::move(codes);
}

unsigned ConflictSet::reasons(std::size_t a, std::size_t b) const {
  if (a == b || a >= n_ || b >= n_) return 0;
  if (a > b) std::swap(a, b);
  unsigned out = 0;
  if (auto it = explicit_.find(key(a, b)); it != explicit_.end()) out |= it->second;
  if (!affiliations_.empty()) {
    const auto& x = affiliations_[a];
    const auto& y = affiliations_[b];
    std::size_t i = 0, j = 0;
    while (i < x.size() && j < y.size()) {
      if (x[i] == y[j]) {
        out |= kSharedAffiliation;
        break;
      }
      if (x[i] < y[j]) {
        ++i;
      } else {
        ++j;
      }
    }
  }
  return out;
}

std::vector<ConflictPair> ConflictSet::pairs() const {
  std::map<std::pair<std::size_t, std::size_t>, unsigned> merged;
  for (const auto& [k, r] : explicit_) merged[{k / n_, k % n_}] |= r;
  if (!affiliations_.empty()) {
    std::map<std::uint32_t, std::vector<std::size_t>> members;
    for (std::size_t i = 0; i < n_; ++i) {
      for (auto code : affiliations_[i]) members[code].push_back(i);
    }
    for (const auto& [code, group] : members) {
      for (std::size_t x = 0; x < group.size(); ++x) {
        for (std::size_t y = x + 1; y < group.size(); ++y) merged[{group[x], group[y]}] |= kSharedAffiliation;
      }
    }
  }
  std::vector<ConflictPair> out;
  out.reserve(merged.size());
  for (const auto& [p, r] : merged) out.push_back({p.first, p.second, r});
  return out;
}

ConflictSet detect_conflicts(const Community& community, const CoiRules& rules, int evaluation_year) {
  if (rules.coauthor_window_years < 0) throw ValidationError("coauthor window must be >= 0");
  ConflictSet set(community.size());
  for (const auto& e : community.coauthor_edges()) {
    if (evaluation_year - e.last_year <= rules.coauthor_window_years) set.add(e.a, e.b, kCoauthor);
  }
  if (rules.shared_affiliation) {
    std::map<std::string, std::uint32_t> code_of;
    std::vector<std::vector<std::uint32_t>> codes(community.size());
    for (std::size_t i = 0; i < community.size(); ++i) {
      for (const auto& aff : community.agent(i).affiliation_ids) {
        auto [it, inserted] = code_of.emplace(aff, static_cast<std::uint32_t>(code_of.size()));
        codes[i].push_back(it->second);
      }
    }
    set.set_affiliations(std::move(codes));
  }
  return set;
}

// ---------------------------------------------------------------------------
// Masking

namespace {

PlanRow surviving_entries(const PlanRow& row, std::size_t donor, const ConflictSet& conflicts) {
  PlanRow kept;
  kept.reserve(row.size());
  for (const auto& e : row) {
    if (!conflicts.conflicted(donor, e.recipient)) kept.push_back(e);
  }
  return kept;
}

}  // namespace

AllocationPlan mask_plan(const AllocationPlan& plan, const ConflictSet& conflicts) {
  AllocationPlan out = plan;
  for (std::size_t i = 0; i < plan.size(); ++i) {
    if (!plan.is_donor(i)) continue;
    PlanRow kept = surviving_entries(plan.row(i), i, conflicts);
    if (kept.size() == plan.row(i).size()) continue;
    if (kept.empty()) {
      throw EmptyRowError(i, "donor #" + std::to_string(i) + " has no recipients left after conflict masking");
    }
    out.set_row(i, std::move(kept));
  }
  return out;
}

AllocationPlan mask_plan_with_fallback(const AllocationPlan& plan, const ConflictSet& conflicts,
                                       const Community& community) {
  AllocationPlan out = plan;
  for (std::size_t i = 0; i < plan.size(); ++i) {
    if (!plan.is_donor(i)) continue;
    PlanRow kept = surviving_entries(plan.row(i), i, conflicts);
    if (kept.size() == plan.row(i).size()) continue;
    if (kept.empty()) {
      for (std::size_t j : community.members_of_domain(community.agent(i).domain_id)) {
        if (j != i && !conflicts.conflicted(i, j)) kept.push_back({j, 1.0});
      }
    }
    if (kept.empty()) {
      throw EmptyRowError(i, "donor '" + community.agent(i).id +
                                 "' has no non-conflicted recipient, even within its domain");
    }
    out.set_row(i, std::move(kept));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Cartels

std::string_view to_string(PenaltyPolicy policy) {
  switch (policy) {
    case PenaltyPolicy::none: return "none";
    case PenaltyPolicy::void_and_redistribute: return "void_and_redistribute";
    case PenaltyPolicy::zero_internal_weights: return "zero_internal_weights";
  }
  return "none";
}

std::string_view to_string(CartelKind kind) {
  return kind == CartelKind::reciprocal_pair ? "reciprocal_pair" : "group";
}

namespace {

/// Per-round pools and flows reconstructed from the ledger.
class RoundFlows {
 public:
  RoundFlows(const DonationLedger& ledger, std::size_t n) : n_(n) {
    first_ = ledger.first_round();
    rounds_ = ledger.round_span();
    pools_.resize(rounds_);
    flows_.resize(rounds_);
    aggregate_pool_.assign(n, 0.0);
    aggregate_flow_.reserve(ledger.records().size());
    for (const auto& t : ledger.records()) {
      if (t.donor >= n || t.recipient >= n) throw DimensionError("ledger references an agent out of range");
      const std::size_t r = t.round - first_;
      pools_[r][t.donor] += t.amount;
      flows_[r][key(t.donor, t.recipient)] += t.amount;
      aggregate_pool_[t.donor] += t.amount;
      aggregate_flow_[key(t.donor, t.recipient)] += t.amount;
    }
    outgoing_.assign(rounds_, std::vector<std::vector<std::pair<std::size_t, double>>>(n));
    for (std::size_t r = 0; r < rounds_; ++r) {
      for (const auto& [k, amount] : flows_[r]) outgoing_[r][donor_of(k)].emplace_back(recipient_of(k), amount);
    }
  }

  std::size_t rounds() const { return rounds_; }
  std::size_t first_round() const { return first_; }

  double pool(std::size_t r, std::size_t i) const {
    auto it = pools_[r].find(i);
    return it == pools_[r].end() ? 0.0 : it->second;
  }
  double flow(std::size_t r, std::size_t i, std::size_t j) const {
    auto it = flows_[r].find(key(i, j));
    return it == flows_[r].end() ? 0.0 : it->second;
  }
  double share(std::size_t r, std::size_t i, std::size_t j) const {
    const double p = pool(r, i);
    return p > 0.0 ? flow(r, i, j) / p : 0.0;
  }
  double aggregate_share(std::size_t i, std::size_t j) const {
    auto it = aggregate_flow_.find(key(i, j));
    if (it == aggregate_flow_.end() || !(aggregate_pool_[i] > 0.0)) return 0.0;
    return it->second / aggregate_pool_[i];
  }
  const std::unordered_map<std::uint64_t, double>& aggregate_flows() const { return aggregate_flow_; }
  const std::vector<std::pair<std::size_t, double>>& outgoing(std::size_t r, std::size_t i) const {
    return outgoing_[r][i];
  }
  std::size_t donor_of(std::uint64_t k) const { return static_cast<std::size_t>(k / n_); }
  std::size_t recipient_of(std::uint64_t k) const { return static_cast<std::size_t>(k % n_); }

  /// (internal flow, pool) of `members` in round r.
  std::pair<double, double> internal(std::size_t r, const std::vector<std::size_t>& members) const {
    double inside = 0.0, pool_sum = 0.0;
    for (std::size_t i : members) {
      pool_sum += pool(r, i);
      for (std::size_t j : members) {
        if (i != j) inside += flow(r, i, j);
      }
    }
    return {inside, pool_sum};
  }

 private:
  std::uint64_t key(std::size_t i, std::size_t j) const { return static_cast<std::uint64_t>(i) * n_ + j; }

  std::size_t n_;
  std::size_t first_ = 0;
  std::size_t rounds_ = 0;
  std::vector<std::unordered_map<std::size_t, double>> pools_;
  std::vector<std::unordered_map<std::uint64_t, double>> flows_;
  std::vector<double> aggregate_pool_;
  std::unordered_map<std::uint64_t, double> aggregate_flow_;
  std::vector<std::vector<std::vector<std::pair<std::size_t, double>>>> outgoing_;
};

struct Run {
  std::size_t start = 0;
  std::size_t length = 0;
};

/// Longest run of qualifying rounds; the earliest wins ties.
Run longest_run(const std::vector<bool>& qualifies) {
  Run best, current;
  for (std::size_t r = 0; r < qualifies.size(); ++r) {
    if (qualifies[r]) {
      if (current.length == 0) current.start = r;
      ++current.length;
      if (current.length > best.length) best = current;
    } else {
      current.length = 0;
    }
  }
  return best;
}

CartelFlag make_flag(CartelKind kind, std::vector<std::size_t> members, const Run& run, const RoundFlows& flows,
                     const DonationLedger& ledger) {
  CartelFlag flag;
  flag.kind = kind;
  flag.members = std::move(members);
  flag.rounds_observed = run.length;
  flag.first_round = flows.first_round() + run.start;
  double inside = 0.0, pool = 0.0;
  for (std::size_t r = run.start; r < run.start + run.length; ++r) {
    auto [in, p] = flows.internal(r, flag.members);
    inside += in;
    pool += p;
  }
  flag.score = pool > 0.0 ? inside / pool : 0.0;
  const std::size_t last = flag.first_round + run.length;
  auto is_member = [&](std::size_t a) {
    return std::binary_search(flag.members.begin(), flag.members.end(), a);
  };
  for (const auto& t : ledger.records()) {
    if (t.round >= flag.first_round && t.round < last && is_member(t.donor) && is_member(t.recipient)) {
      flag.evidence.push_back(t);
    }
  }
  std::sort(flag.evidence.begin(), flag.evidence.end(), [](const Transfer& a, const Transfer& b) {
    return std::tie(a.round, a.donor, a.recipient) < std::tie(b.round, b.donor, b.recipient);
  });
  return flag;
}

std::vector<CartelFlag> reciprocal_pairs(const RoundFlows& flows, const DonationLedger& ledger,
                                         const CartelThresholds& th) {
  std::vector<std::pair<std::size_t, std::size_t>> candidates;
  for (const auto& [k, amount] : flows.aggregate_flows()) {
    const std::size_t i = flows.donor_of(k), j = flows.recipient_of(k);
    if (i < j && flows.aggregate_share(j, i) > 0.0) candidates.emplace_back(i, j);
  }
  std::sort(candidates.begin(), candidates.end());

  std::vector<CartelFlag> out;
  std::vector<bool> qualifies(flows.rounds());
  for (const auto& [i, j] : candidates) {
    for (std::size_t r = 0; r < flows.rounds(); ++r) {
      qualifies[r] = std::min(flows.share(r, i, j), flows.share(r, j, i)) >= th.pair_reciprocity;
    }
    const Run run = longest_run(qualifies);
    if (run.length >= th.min_rounds) {
      out.push_back(make_flag(CartelKind::reciprocal_pair, {i, j}, run, flows, ledger));
    }
  }
  return out;
}

bool strongly_connected_within(const std::vector<std::size_t>& members, const Adjacency& out,
                               const Adjacency& in) {
  auto reaches_all = [&](const Adjacency& g) {
    std::vector<std::size_t> seen{members.front()}, frontier{members.front()};
    while (!frontier.empty()) {
      const std::size_t v = frontier.back();
      frontier.pop_back();
      for (std::size_t u : g[v]) {
        if (std::find(members.begin(), members.end(), u) == members.end()) continue;
        if (std::find(seen.begin(), seen.end(), u) != seen.end()) continue;
        seen.push_back(u);
        frontier.push_back(u);
      }
    }
    return seen.size() == members.size();
  };
  return reaches_all(out) && reaches_all(in);
}

/// Enumerates vertex sets of size <= k whose minimum is `root` and whose
/// members are all reachable from root along strong edges, each exactly once.
/// A strongly connected set is such a set for its minimum. Branches are cut
/// when an upper bound on internal surplus, sum over members of
/// pool_i * (best reachable share_i - theta_s), goes negative in too many rounds.
class GroupSearch {
 public:
  GroupSearch(const RoundFlows& flows, const Adjacency& out, const CartelThresholds& th, std::size_t n)
      : flows_(flows), out_(out), th_(th), k_(th.max_group_size), rounds_(flows.rounds()),
        state_(n, kOutside), forward_(n, kFar), backward_(n, kFar), round_pool_(rounds_, 0.0) {
    for (std::size_t r = 0; r < rounds_; ++r) {
      for (std::size_t i = 0; i < n; ++i) {
        for (const auto& e : flows.outgoing(r, i)) round_pool_[r] += e.second;
      }
    }
  }

  template <typename Visit>
  void run(std::size_t root, Visit&& visit) {
    if (!collect_candidates(root)) {
      reset();
      return;
    }
    compute_surplus();
    sums_.assign(rounds_, 0.0);
    set_.clear();
    frontier_.assign(1, root);
    state_[root] = kSeen;
    include(0, visit);
    reset();
  }

 private:
  static constexpr std::uint8_t kOutside = 0, kFree = 1, kSeen = 2, kMember = 3;
  static constexpr std::size_t kFar = static_cast<std::size_t>(-1);

  // Candidates lie within k-1 strong steps of root in both directions,
  // using only vertices above root.
  bool collect_candidates(std::size_t root) {
    ball_.assign(1, root);
    forward_[root] = 0;
    for (std::size_t head = 0; head < ball_.size(); ++head) {
      const std::size_t v = ball_[head];
      if (forward_[v] + 1 >= k_) continue;
      for (std::size_t u : out_[v]) {
        if (u > root && forward_[u] == kFar) {
          forward_[u] = forward_[v] + 1;
          ball_.push_back(u);
        }
      }
    }
    backward_[root] = 0;
    for (std::size_t pass = 1; pass < k_; ++pass) {
      bool changed = false;
      for (std::size_t v : ball_) {
        for (std::size_t u : out_[v]) {
          if (forward_[u] != kFar && backward_[u] != kFar && backward_[u] + 1 < backward_[v]) {
            backward_[v] = backward_[u] + 1;
            changed = true;
          }
        }
      }
      if (!changed) break;
    }
    candidates_.clear();
    for (std::size_t v : ball_) {
      if (backward_[v] != kFar) candidates_.push_back(v);
    }
    for (std::size_t v : candidates_) state_[v] = kFree;
    return candidates_.size() >= 2;
  }

  void compute_surplus() {
    surplus_.assign(candidates_.size() * rounds_, 0.0);
    slot_.clear();
    best_.assign(rounds_, 0.0);
    std::vector<double> shares;
    for (std::size_t c = 0; c < candidates_.size(); ++c) {
      const std::size_t i = candidates_[c];
      slot_[i] = c;
      for (std::size_t r = 0; r < rounds_; ++r) {
        const double pool = flows_.pool(r, i);
        shares.clear();
        for (const auto& [j, amount] : flows_.outgoing(r, i)) {
          if (j != i && state_[j] == kFree) shares.push_back(amount);
        }
        const std::size_t top = std::min(shares.size(), k_ - 1);
        std::partial_sort(shares.begin(), shares.begin() + static_cast<std::ptrdiff_t>(top), shares.end(),
                          std::greater<>());
        double reachable = 0.0;
        for (std::size_t t = 0; t < top; ++t) reachable += shares[t];
        const double a = std::min(reachable, pool) - th_.internal_share * pool;
        surplus_[c * rounds_ + r] = a;
        best_[r] = std::max(best_[r], a);
      }
    }
  }

  bool promising() const {
    const double room = static_cast<double>(k_ - set_.size());
    std::size_t ok = 0;
    for (std::size_t r = 0; r < rounds_; ++r) {
      ok += sums_[r] + room * best_[r] >= -1e-9 * round_pool_[r] ? 1 : 0;
    }
    return ok >= th_.min_rounds;
  }

  template <typename Visit>
  void include(std::size_t next, Visit& visit) {
    const std::size_t v = frontier_[next];
    state_[v] = kMember;
    set_.push_back(v);
    const std::size_t c = slot_.at(v);
    for (std::size_t r = 0; r < rounds_; ++r) sums_[r] += surplus_[c * rounds_ + r];
    if (promising()) {
      if (set_.size() >= 2) visit(set_);
      const std::size_t mark = frontier_.size();
      if (set_.size() < k_) {
        for (std::size_t u : out_[v]) {
          if (state_[u] == kFree) {
            state_[u] = kSeen;
            frontier_.push_back(u);
          }
        }
      }
      branch(next + 1, visit);
      for (std::size_t f = mark; f < frontier_.size(); ++f) state_[frontier_[f]] = kFree;
      frontier_.resize(mark);
    }
    for (std::size_t r = 0; r < rounds_; ++r) sums_[r] -= surplus_[c * rounds_ + r];
    set_.pop_back();
    state_[v] = kSeen;
  }

  // Frontier entries before `next` are decided; each remaining one is either
  // taken now or skipped for good.
  template <typename Visit>
  void branch(std::size_t next, Visit& visit) {
    if (set_.size() >= k_) return;
    for (std::size_t f = next; f < frontier_.size(); ++f) include(f, visit);
  }

  void reset() {
    for (std::size_t v : ball_) {
      state_[v] = kOutside;
      forward_[v] = kFar;
      backward_[v] = kFar;
    }
  }

  const RoundFlows& flows_;
  const Adjacency& out_;
  const CartelThresholds& th_;
  std::size_t k_;
  std::size_t rounds_;
  std::vector<std::uint8_t> state_;
  std::vector<std::size_t> forward_, backward_;
  std::vector<double> round_pool_;
  std::vector<std::size_t> ball_, candidates_, frontier_, set_;
  std::unordered_map<std::size_t, std::size_t> slot_;
  std::vector<double> surplus_, best_, sums_;
};

std::vector<CartelFlag> groups(const RoundFlows& flows, const DonationLedger& ledger, std::size_t n,
                               const CartelThresholds& th) {
  const double edge_threshold = th.internal_share / static_cast<double>(th.max_group_size);
  Adjacency out(n), in(n);
  for (const auto& [k, amount] : flows.aggregate_flows()) {
    const std::size_t i = flows.donor_of(k), j = flows.recipient_of(k);
    if (i != j && flows.aggregate_share(i, j) >= edge_threshold) {
      out[i].push_back(j);
      in[j].push_back(i);
    }
  }
  for (auto* g : {&out, &in}) {
    for (auto& nbrs : *g) std::sort(nbrs.begin(), nbrs.end());
  }

  std::vector<bool> cyclic(n, false);
  for (const auto& component : strongly_connected_components(out)) {
    if (component.size() < 2) continue;
    for (std::size_t v : component) cyclic[v] = true;
  }

  GroupSearch search(flows, out, th, n);
  std::vector<CartelFlag> found;
  std::vector<bool> qualifies(flows.rounds());
  for (std::size_t root = 0; root < n; ++root) {
    if (!cyclic[root]) continue;
    search.run(root, [&](const std::vector<std::size_t>& subset) {
      std::vector<std::size_t> members = subset;
      std::sort(members.begin(), members.end());
      if (!strongly_connected_within(members, out, in)) return;
      for (std::size_t r = 0; r < flows.rounds(); ++r) {
        auto [inside, pool] = flows.internal(r, members);
        qualifies[r] = pool > 0.0 && inside / pool >= th.internal_share;
      }
      const Run run = longest_run(qualifies);
      if (run.length >= th.min_rounds) {
        found.push_back(make_flag(CartelKind::group, std::move(members), run, flows, ledger));
      }
    });
  }

  auto proper_subset = [](const std::vector<std::size_t>& a, const std::vector<std::size_t>& b) {
    return a.size() < b.size() && std::includes(b.begin(), b.end(), a.begin(), a.end());
  };
  std::vector<bool> dominated(found.size(), false);
  for (std::size_t x = 0; x < found.size(); ++x) {
    for (std::size_t y = 0; y < found.size() && !dominated[x]; ++y) {
      dominated[x] = proper_subset(found[x].members, found[y].members);
    }
  }
  std::vector<CartelFlag> maximal;
  for (std::size_t x = 0; x < found.size(); ++x) {
    if (!dominated[x]) maximal.push_back(std::move(found[x]));
  }
  std::sort(maximal.begin(), maximal.end(),
            [](const CartelFlag& a, const CartelFlag& b) { return a.members < b.members; });
  return maximal;
}

}  // namespace

std::vector<CartelFlag> detect_cartels(const DonationLedger& ledger, std::size_t n_agents,
                                       const CartelThresholds& thresholds) {
  const auto& th = thresholds;
  if (!(th.pair_reciprocity > 0.0 && th.pair_reciprocity <= 1.0) ||
      !(th.internal_share > 0.0 && th.internal_share <= 1.0)) {
    throw ValidationError("cartel thresholds must lie in (0,1]");
  }
  if (th.max_group_size < 2) throw ValidationError("cartel max_group_size must be >= 2");
  if (th.min_rounds < 1) throw ValidationError("cartel min_rounds must be >= 1");
  if (ledger.round_span() < th.min_rounds) {
    throw InsufficientHistoryError("ledger covers " + std::to_string(ledger.round_span()) +
                                   " round(s); cartel detection needs " + std::to_string(th.min_rounds));
  }
  const RoundFlows flows(ledger, n_agents);
  std::vector<CartelFlag> flags = reciprocal_pairs(flows, ledger, th);
  auto group_flags = groups(flows, ledger, n_agents, th);
  flags.insert(flags.end(), std::make_move_iterator(group_flags.begin()), std::make_move_iterator(group_flags.end()));
  return flags;
}

AllocationPlan apply_penalties(const AllocationPlan& plan, const std::vector<CartelFlag>& flags,
                               PenaltyPolicy policy) {
  if (policy == PenaltyPolicy::none || flags.empty()) return plan;
  std::vector<std::unordered_set<std::size_t>> banned(plan.size());
  for (const auto& flag : flags) {
    for (std::size_t i : flag.members) {
      if (i >= plan.size()) throw DimensionError("cartel flag references an agent outside the plan");
      for (std::size_t j : flag.members) {
        if (i != j) banned[i].insert(j);
      }
    }
  }
  AllocationPlan out = plan;
  for (std::size_t i = 0; i < plan.size(); ++i) {
    if (banned[i].empty() || !plan.is_donor(i)) continue;
    PlanRow kept;
    for (const auto& e : plan.row(i)) {
      if (!banned[i].count(e.recipient)) kept.push_back(e);
    }
    if (kept.empty()) {
      throw EmptyRowError(i, "cartel member #" + std::to_string(i) + " has no recipient outside its cartel");
    }
    out.set_row(i, std::move(kept));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Audit

std::vector<ConflictedTransfer> find_conflicted_transfers(const DonationLedger& ledger, const ConflictSet& conflicts) {
  std::vector<ConflictedTransfer> out;
  for (const auto& t : ledger.records()) {
    if (const unsigned r = conflicts.reasons(t.donor, t.recipient)) out.push_back({t, r});
  }
  return out;
}

IntegrityReport audit_ledger(const DonationLedger& ledger, std::size_t n_agents, const ConflictSet& conflicts,
                             const CartelThresholds& thresholds) {
  IntegrityReport report;
  report.conflicted_transfers = find_conflicted_transfers(ledger, conflicts);
  report.transfer_count = ledger.records().size();
  report.rounds_covered = ledger.round_span();
  for (const auto& t : ledger.records()) report.total_amount += t.amount;
  for (const auto& c : report.conflicted_transfers) report.conflicted_amount += c.transfer.amount;
  report.cartel_history_sufficient = !ledger.empty() && ledger.round_span() >= thresholds.min_rounds;
  if (report.cartel_history_sufficient) report.cartel_flags = detect_cartels(ledger, n_agents, thresholds);
  return report;
}

}  // namespace sofa
