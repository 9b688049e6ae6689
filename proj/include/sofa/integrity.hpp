#pragma once

#include <cstddef>
#include <cstdint>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "sofa/ledger.hpp"
#include "sofa/plan.hpp"
#include "sofa/population.hpp"

namespace sofa {

enum ConflictReason : unsigned {
  kCoauthor = 1u << 0,
  kSharedAffiliation = 1u << 1,
};

struct ConflictPair {
  std::size_t a = 0;  // a < b
  std::size_t b = 0;
  unsigned reasons = 0;

  friend bool operator==(const ConflictPair&, const ConflictPair&) = default;
};

/// Symmetric donor/recipient exclusions. Coauthor pairs are stored
/// explicitly; shared-affiliation conflicts are answered from per-agent
/// affiliation codes so large institutions do not cost O(members^2) memory.
class ConflictSet {
 public:
  explicit ConflictSet(std::size_t n_agents = 0) : n_(n_agents) {}

  std::size_t agent_count() const noexcept { return n_; }

  /// Adds (or ORs) reasons for the unordered pair. Self-pairs are rejected.
  void add(std::size_t a, std::size_t b, unsigned reasons);
  /// Sorted affiliation codes per agent; any shared code is a conflict.
  void set_affiliations(std::vector<std::vector<std::uint32_t>> codes);

  unsigned reasons(std::size_t a, std::size_t b) const;
  bool conflicted(std::size_t a, std::size_t b) const { return reasons(a, b) != 0; }

  /// Every conflicted pair, sorted. Cost grows with affiliation sizes squared.
  std::vector<ConflictPair> pairs() const;

 private:
  std::uint64_t key(std::size_t a, std::size_t b) const { return static_cast<std::uint64_t>(a) * n_ + b; }

  std::size_t n_ = 0;
  std::unordered_map<std::uint64_t, unsigned> explicit_;
  std::vector<std::vector<std::uint32_t>> affiliations_;
};

struct CoiRules {
  int coauthor_window_years = 5;
  bool shared_affiliation = true;
  /// Donors left without recipients after masking fall back to a uniform
  /// row over non-conflicted agents of their domain.
  bool fallback_uniform_domain = true;

  friend bool operator==(const CoiRules&, const CoiRules&) = default;
};

/// Pairs flagged iff coauthored within the window (evaluation_year - year
/// <= window) or, when enabled, sharing an affiliation.
ConflictSet detect_conflicts(const Community& community, const CoiRules& rules, int evaluation_year);

/// Drops conflicted weights and renormalizes. Throws EmptyRowError for a
/// donor that loses every recipient.
AllocationPlan mask_plan(const AllocationPlan& plan, const ConflictSet& conflicts);

/// mask_plan, but emptied rows are replaced by a uniform row over the donor's
/// non-conflicted domain peers. Throws EmptyRowError if there are none.
AllocationPlan mask_plan_with_fallback(const AllocationPlan& plan, const ConflictSet& conflicts,
                                       const Community& community);

struct CartelThresholds {
  double pair_reciprocity = 0.5;
  double internal_share = 0.6;
  std::size_t max_group_size = 5;
  std::size_t min_rounds = 2;

  friend bool operator==(const CartelThresholds&, const CartelThresholds&) = default;
};

enum class CartelKind { reciprocal_pair, group };

struct CartelFlag {
  CartelKind kind = CartelKind::group;
  std::vector<std::size_t> members;  // sorted
  /// Internal-flow share over the flagged rounds.
  double score = 0.0;
  std::size_t rounds_observed = 0;
  std::size_t first_round = 0;
  std::vector<Transfer> evidence;
};

/// Pair flags: min(share i->j, share j->i) >= pair_reciprocity in at least
/// min_rounds consecutive rounds. Group flags: member sets of size 2..k that
/// are strongly connected in the round-aggregated digraph (edge kept when its
/// share of the donor's pool is >= internal_share / k) and route at least
/// internal_share of their pools internally for min_rounds consecutive
/// rounds. Group flags are maximal. Shares are taken of the donation pools
/// implied by the ledger.
std::vector<CartelFlag> detect_cartels(const DonationLedger& ledger, std::size_t n_agents,
                                       const CartelThresholds& thresholds);

enum class PenaltyPolicy { none, void_and_redistribute, zero_internal_weights };

std::string_view to_string(PenaltyPolicy policy);
std::string_view to_string(CartelKind kind);

/// Zeroes intra-cartel weights of every member row and renormalizes over the
/// remaining recipients. Both penalty kinds share these semantics.
AllocationPlan apply_penalties(const AllocationPlan& plan, const std::vector<CartelFlag>& flags,
                               PenaltyPolicy policy);

struct ConflictedTransfer {
  Transfer transfer;
  unsigned reasons = 0;
};

struct IntegrityReport {
  std::vector<ConflictedTransfer> conflicted_transfers;
  std::vector<CartelFlag> cartel_flags;
  std::size_t transfer_count = 0;
  std::size_t rounds_covered = 0;
  double total_amount = 0.0;
  double conflicted_amount = 0.0;
  /// False when the ledger is too short for cartel detection.
  bool cartel_history_sufficient = false;

  bool violation() const noexcept { return !conflicted_transfers.empty() || !cartel_flags.empty(); }
};

std::vector<ConflictedTransfer> find_conflicted_transfers(const DonationLedger& ledger, const ConflictSet& conflicts);

IntegrityReport audit_ledger(const DonationLedger& ledger, std::size_t n_agents, const ConflictSet& conflicts,
                             const CartelThresholds& thresholds);

}  // namespace sofa
