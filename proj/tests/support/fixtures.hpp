#pragma once

#include <algorithm>
#include <cstddef>
#include <random>
#include <string>
#include <vector>

#include "sofa/ledger.hpp"
#include "sofa/plan.hpp"
#include "sofa/population.hpp"
#include "sofa/types.hpp"

namespace fixture {

inline std::string agent_id(std::size_t k) { return "agent-" + std::to_string(k); }

/// n scientists agent-1..agent-n in one domain, no edges, no affiliations.
inline sofa::Community plain_community(std::size_t n, const std::string& domain = "d1") {
  std::vector<sofa::Agent> agents;
  for (std::size_t k = 1; k <= n; ++k) {
    sofa::Agent a;
    a.id = agent_id(k);
    a.domain_id = domain;
    a.merit = 1.0;
    agents.push_back(a);
  }
  return sofa::Community(std::move(agents), {});
}

/// Plan from 1-based (donor, recipient) pairs, each at weight 1.
inline sofa::AllocationPlan single_target_plan(std::size_t n, const std::vector<std::pair<std::size_t, std::size_t>>& edges) {
  sofa::AllocationPlan plan(n);
  for (auto [i, j] : edges) plan.set_row(i - 1, {{j - 1, 1.0}});
  return plan;
}

/// 3-cycle 1->2->3->1.
inline sofa::AllocationPlan example_a() { return single_target_plan(3, {{1, 2}, {2, 3}, {3, 1}}); }

/// 1->3, 2->3, 3->1.
inline sofa::AllocationPlan example_b() { return single_target_plan(3, {{1, 3}, {2, 3}, {3, 1}}); }

inline sofa::Vector constant(std::size_t n, double v) { return sofa::Vector::Constant(static_cast<Eigen::Index>(n), v); }

/// Random row-stochastic plan: every agent donates to 1..d random others.
inline sofa::AllocationPlan random_plan(std::size_t n, std::size_t d, std::mt19937_64& rng) {
  sofa::AllocationPlan plan(n);
  std::uniform_real_distribution<double> w(0.05, 1.0);
  std::uniform_int_distribution<std::size_t> pick(0, n - 1);
  std::uniform_int_distribution<std::size_t> degree(1, std::min(d, n - 1));
  for (std::size_t i = 0; i < n; ++i) {
    sofa::PlanRow row;
    const std::size_t k = degree(rng);
    while (row.size() < k) {
      const std::size_t j = pick(rng);
      if (j == i) continue;
      bool dup = false;
      for (const auto& e : row) dup = dup || e.recipient == j;
      if (!dup) row.push_back({j, w(rng)});
    }
    plan.set_row(i, std::move(row));
  }
  return plan;
}

inline std::vector<double> to_std(const sofa::Vector& v) { return {v.data(), v.data() + v.size()}; }

struct PlantedLedger {
  sofa::DonationLedger ledger;
  std::vector<std::vector<std::size_t>> cartels;  // sorted member indices
};

/// n agents over `rounds` rounds. Each cartel member routes `internal` of its
/// pool uniformly to fellow members and spreads the rest thinly outside.
/// Background donors send `favourite` to one agent and spread the rest over
/// 14 others, so no background share exceeds `favourite`.
inline PlantedLedger planted_ledger(std::size_t n, std::size_t n_cartels, std::size_t cartel_size, std::size_t rounds,
                                    double internal, double favourite, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  std::shuffle(order.begin(), order.end(), rng);
  PlantedLedger out;
  std::vector<int> cartel_of(n, -1);
  for (std::size_t c = 0; c < n_cartels; ++c) {
    std::vector<std::size_t> members(order.begin() + static_cast<std::ptrdiff_t>(c * cartel_size),
                                     order.begin() + static_cast<std::ptrdiff_t>((c + 1) * cartel_size));
    std::sort(members.begin(), members.end());
    for (auto m : members) cartel_of[m] = static_cast<int>(c);
    out.cartels.push_back(members);
  }
  auto others = [&](std::size_t i, std::size_t count, bool avoid_cartel) {
    std::vector<std::size_t> picked;
    while (picked.size() < count) {
      const std::size_t j = rng() % n;
      if (j == i || std::find(picked.begin(), picked.end(), j) != picked.end()) continue;
      if (avoid_cartel && cartel_of[i] >= 0 && cartel_of[j] == cartel_of[i]) continue;
      picked.push_back(j);
    }
    return picked;
  };
  sofa::AllocationPlan plan(n);
  for (std::size_t i = 0; i < n; ++i) {
    sofa::PlanRow row;
    if (cartel_of[i] >= 0) {
      const auto& members = out.cartels[static_cast<std::size_t>(cartel_of[i])];
      for (auto m : members) {
        if (m != i) row.push_back({m, internal / static_cast<double>(members.size() - 1)});
      }
      for (auto j : others(i, 10, true)) row.push_back({j, (1.0 - internal) / 10.0});
    } else {
      const auto picked = others(i, 15, false);
      row.push_back({picked[0], favourite});
      for (std::size_t k = 1; k < picked.size(); ++k) row.push_back({picked[k], (1.0 - favourite) / 14.0});
    }
    plan.set_row(i, row);
  }
  std::uniform_real_distribution<double> pool(1.0, 10.0);
  for (std::size_t r = 1; r <= rounds; ++r) {
    for (std::size_t i = 0; i < n; ++i) {
      const double p = pool(rng);
      for (const auto& e : plan.row(i)) out.ledger.add({r, i, e.recipient, p * e.weight});
    }
  }
  return out;
}

}  // namespace fixture
