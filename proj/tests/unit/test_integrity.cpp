#include <doctest.h>

#include <random>
#include <set>

#include "fixtures.hpp"
#include "oracles.hpp"
#include "sofa/error.hpp"
#include "sofa/graph.hpp"
#include "sofa/integrity.hpp"

using doctest::Approx;

namespace {

sofa::Community with_affiliations(std::size_t n, const std::vector<std::string>& affs,
                                  std::vector<sofa::CoauthorEdge> edges = {}) {
  auto agents = fixture::plain_community(n).agents();
  for (std::size_t i = 0; i < n && i < affs.size(); ++i) {
    if (!affs[i].empty()) agents[i].affiliation_ids = {affs[i]};
  }
  return sofa::Community(std::move(agents), std::move(edges));
}

std::set<std::vector<std::size_t>> member_sets(const std::vector<sofa::CartelFlag>& flags, sofa::CartelKind kind) {
  std::set<std::vector<std::size_t>> out;
  for (const auto& f : flags) {
    if (f.kind == kind) out.insert(f.members);
  }
  return out;
}

std::string str(const std::set<std::vector<std::size_t>>& sets) {
  std::string out;
  for (const auto& s : sets) {
    out += "{";
    for (auto v : s) out += std::to_string(v) + ",";
    out += "} ";
  }
  return out;
}

sofa::DonationLedger full_rounds(const sofa::AllocationPlan& plan, std::size_t rounds) {
  sofa::DonationLedger ledger;
  for (std::size_t r = 1; r <= rounds; ++r) {
    for (std::size_t i = 0; i < plan.size(); ++i) {
      for (const auto& e : plan.row(i)) ledger.add({r, i, e.recipient, e.weight});
    }
  }
  return ledger;
}

}  // namespace

TEST_CASE("conflicts: recent coauthors") {
  const auto c = with_affiliations(3, {"A", "B", "C"}, {{0, 1, 2022}, {1, 2, 2010}});
  const auto cs = sofa::detect_conflicts(c, {}, 2024);
  CHECK(cs.reasons(0, 1) == sofa::kCoauthor);
  CHECK(cs.reasons(1, 0) == sofa::kCoauthor);
  CHECK_FALSE(cs.conflicted(1, 2));
}

TEST_CASE("conflicts: window boundary is inclusive") {
  const auto c = with_affiliations(3, {"A", "B", "C"}, {{0, 1, 2019}, {1, 2, 2018}});
  const auto cs = sofa::detect_conflicts(c, {}, 2024);
  CHECK(cs.conflicted(0, 1));
  CHECK_FALSE(cs.conflicted(1, 2));
}

TEST_CASE("conflicts: shared affiliation") {
  const auto c = with_affiliations(3, {"Univ-A", "Univ-A", "Univ-B"});
  sofa::CoiRules rules;
  auto cs = sofa::detect_conflicts(c, rules, 2024);
  CHECK(cs.reasons(0, 1) == sofa::kSharedAffiliation);
  CHECK_FALSE(cs.conflicted(0, 2));
  rules.shared_affiliation = false;
  cs = sofa::detect_conflicts(c, rules, 2024);
  CHECK_FALSE(cs.conflicted(0, 1));
}

TEST_CASE("conflicts: both reasons, symmetric, no self pairs") {
  const auto c = with_affiliations(2, {"A", "A"}, {{0, 1, 2024}});
  const auto cs = sofa::detect_conflicts(c, {}, 2024);
  CHECK(cs.reasons(0, 1) == (sofa::kCoauthor | sofa::kSharedAffiliation));
  CHECK_FALSE(cs.conflicted(0, 0));
  const auto pairs = cs.pairs();
  REQUIRE(pairs.size() == 1);
  CHECK(pairs[0] == sofa::ConflictPair{0, 1, sofa::kCoauthor | sofa::kSharedAffiliation});
  sofa::ConflictSet manual(3);
  CHECK_THROWS(manual.add(1, 1, sofa::kCoauthor));
}

TEST_CASE("mask: conflicted weight dropped and renormalized") {
  sofa::ConflictSet cs(3);
  cs.add(0, 1, sofa::kCoauthor);
  sofa::AllocationPlan plan(3);
  plan.set_row(0, {{1, 0.4}, {2, 0.6}});
  const auto masked = sofa::mask_plan(plan, cs);
  REQUIRE(masked.row(0).size() == 1);
  CHECK(masked.weight(0, 2) == 1.0);
  CHECK(sofa::mask_plan(plan, sofa::ConflictSet(3)) == plan);
}

TEST_CASE("mask: fully conflicted row") {
  sofa::ConflictSet cs(3);
  cs.add(0, 1, sofa::kCoauthor);
  sofa::AllocationPlan plan(3);
  plan.set_row(0, {{1, 1.0}});
  try {
    (void)sofa::mask_plan(plan, cs);
    FAIL("expected an empty-row error");
  } catch (const sofa::EmptyRowError& e) {
    CHECK(e.donor() == 0);
  }
  const auto c = fixture::plain_community(3);
  const auto fallback = sofa::mask_plan_with_fallback(plan, cs, c);
  REQUIRE(fallback.row(0).size() == 1);
  CHECK(fallback.weight(0, 2) == 1.0);
}

TEST_CASE("property: masking is idempotent and exhaustive") {
  std::mt19937_64 rng(7);
  for (int trial = 0; trial < 30; ++trial) {
    const std::size_t n = 40;
    std::vector<std::string> affs(n);
    for (auto& a : affs) a = "u" + std::to_string(rng() % 12);
    std::vector<sofa::CoauthorEdge> edges;
    for (int e = 0; e < 60; ++e) {
      const std::size_t a = rng() % n, b = rng() % n;
      if (a != b) edges.push_back({a, b, 2015 + static_cast<int>(rng() % 10)});
    }
    const auto c = with_affiliations(n, affs, edges);
    const auto cs = sofa::detect_conflicts(c, {}, 2024);
    const auto plan = fixture::random_plan(n, 12, rng);
    sofa::AllocationPlan masked;
    try {
      masked = sofa::mask_plan(plan, cs);
    } catch (const sofa::EmptyRowError&) {
      masked = sofa::mask_plan_with_fallback(plan, cs, c);
    }
    CHECK(sofa::mask_plan(masked, cs) == masked);
    for (std::size_t i = 0; i < n; ++i) {
      for (const auto& e : masked.row(i)) {
        const auto& ai = c.agent(i);
        const auto& aj = c.agent(e.recipient);
        bool shares = false;
        for (const auto& x : ai.affiliation_ids) shares = shares || aj.affiliation_ids.count(x) > 0;
        bool recent = false;
        for (const auto& ed : c.coauthor_edges()) {
          const bool pair = (ed.a == i && ed.b == e.recipient) || (ed.b == i && ed.a == e.recipient);
          recent = recent || (pair && 2024 - ed.last_year <= 5);
        }
        CHECK_FALSE(shares);
        CHECK_FALSE(recent);
      }
    }
  }
}

TEST_CASE("strongly connected components") {
  sofa::Adjacency g(6);
  g[0] = {1};
  g[1] = {2};
  g[2] = {0};
  g[3] = {4};
  g[4] = {3, 5};
  const auto comps = sofa::strongly_connected_components(g);
  REQUIRE(comps.size() == 3);
  CHECK(comps[0] == std::vector<std::size_t>{0, 1, 2});
  CHECK(comps[1] == std::vector<std::size_t>{3, 4});
  CHECK(comps[2] == std::vector<std::size_t>{5});
  sofa::Adjacency chain(100000);
  for (std::size_t i = 0; i + 1 < chain.size(); ++i) chain[i] = {i + 1};
  chain.back() = {0};
  CHECK(sofa::strongly_connected_components(chain).size() == 1);
}

TEST_CASE("cartels: mutual full donation is a pair with score 1") {
  sofa::DonationLedger ledger;
  for (std::size_t r = 1; r <= 3; ++r) {
    ledger.add({r, 0, 1, 5.0});
    ledger.add({r, 1, 0, 7.0});
    ledger.add({r, 2, 0, 1.0});
  }
  sofa::CartelThresholds th;
  th.min_rounds = 3;
  const auto flags = sofa::detect_cartels(ledger, 3, th);
  const auto pairs = member_sets(flags, sofa::CartelKind::reciprocal_pair);
  REQUIRE(pairs.size() == 1);
  CHECK(*pairs.begin() == std::vector<std::size_t>{0, 1});
  for (const auto& f : flags) {
    if (f.kind == sofa::CartelKind::reciprocal_pair) {
      CHECK(f.score == Approx(1.0));
      CHECK(f.rounds_observed == 3);
      CHECK(f.first_round == 1);
      CHECK(f.evidence.size() == 6);
    }
  }
}

TEST_CASE("cartels: uniform background over 20 recipients yields no pairs") {
  std::mt19937_64 rng(3);
  const std::size_t n = 60;
  sofa::AllocationPlan plan(n);
  for (std::size_t i = 0; i < n; ++i) {
    sofa::PlanRow row;
    for (std::size_t k = 1; k <= 20; ++k) row.push_back({(i + k) % n, 1.0});
    plan.set_row(i, row);
  }
  const auto flags = sofa::detect_cartels(full_rounds(plan, 3), n, {});
  CHECK(flags.empty());
}

TEST_CASE("cartels: planted 3-cycle at 90% inside 50-agent background") {
  std::mt19937_64 rng(5);
  const std::size_t n = 50;
  sofa::AllocationPlan plan(n);
  const std::vector<std::size_t> cartel{4, 17, 33};
  for (std::size_t i = 0; i < n; ++i) {
    sofa::PlanRow row;
    const bool member = std::find(cartel.begin(), cartel.end(), i) != cartel.end();
    if (member) {
      const std::size_t next = cartel[(std::find(cartel.begin(), cartel.end(), i) - cartel.begin() + 1) % 3];
      row.push_back({next, 0.9});
    }
    while (row.size() < (member ? 11u : 20u)) {
      const std::size_t j = rng() % n;
      const bool in_cartel = std::find(cartel.begin(), cartel.end(), j) != cartel.end();
      bool dup = false;
      for (const auto& e : row) dup = dup || e.recipient == j;
      if (j != i && !dup && !(member && in_cartel)) row.push_back({j, member ? 0.01 : 0.05});
    }
    plan.set_row(i, row);
  }
  sofa::CartelThresholds th;
  th.internal_share = 0.6;
  th.max_group_size = 4;
  th.min_rounds = 2;
  const auto ledger = full_rounds(plan, 2);
  const auto flags = sofa::detect_cartels(ledger, n, th);
  REQUIRE(flags.size() == 1);
  CHECK(flags[0].kind == sofa::CartelKind::group);
  CHECK(flags[0].members == cartel);
  CHECK(flags[0].score == Approx(0.9).epsilon(1e-9));
}

TEST_CASE("cartels: insufficient history and bad thresholds") {
  sofa::DonationLedger ledger;
  ledger.add({1, 0, 1, 1.0});
  CHECK_THROWS_AS(sofa::detect_cartels(ledger, 2, {}), sofa::InsufficientHistoryError);
  sofa::CartelThresholds th;
  th.internal_share = 0.0;
  CHECK_THROWS_AS(sofa::detect_cartels(ledger, 2, th), sofa::ValidationError);
}

TEST_CASE("property: detector equals brute-force oracle on small populations") {
  std::mt19937_64 rng(1234);
  std::size_t with_groups = 0, with_pairs = 0;
  for (int trial = 0; trial < 80; ++trial) {
    const std::size_t n = 6 + rng() % 25;  // up to 30
    const std::size_t k = 2 + rng() % 3;   // up to 4
    sofa::CartelThresholds th;
    th.max_group_size = k;
    th.internal_share = 0.4 + 0.4 * static_cast<double>(rng() % 100) / 100.0;
    th.pair_reciprocity = 0.3 + 0.4 * static_cast<double>(rng() % 100) / 100.0;
    th.min_rounds = 1 + rng() % 3;
    const std::size_t rounds = th.min_rounds + rng() % 3;
    sofa::DonationLedger ledger;
    // Sparse plans with a few strong edges, re-drawn partially per round.
    auto plan = fixture::random_plan(n, 3, rng);
    for (std::size_t r = 1; r <= rounds; ++r) {
      if (rng() % 3 == 0) plan = fixture::random_plan(n, 3, rng);
      for (std::size_t i = 0; i < n; ++i) {
        const double pool = 1.0 + static_cast<double>(rng() % 9);
        for (const auto& e : plan.row(i)) ledger.add({r, i, e.recipient, pool * e.weight});
      }
    }
    const auto flags = sofa::detect_cartels(ledger, n, th);
    const auto groups = oracle::cartel_groups(ledger, n, th.internal_share, k, th.min_rounds);
    const auto pairs = oracle::reciprocal_pairs(ledger, n, th.pair_reciprocity, th.min_rounds);
    CHECK(str(member_sets(flags, sofa::CartelKind::group)) == str(groups));
    CHECK(str(member_sets(flags, sofa::CartelKind::reciprocal_pair)) == str(pairs));
    with_groups += groups.empty() ? 0 : 1;
    with_pairs += pairs.empty() ? 0 : 1;
  }
  // The sample must exercise both flag kinds.
  CHECK(with_groups > 10);
  CHECK(with_pairs > 10);
}

TEST_CASE("property: planted cartels recovered with precision and recall 1") {
  sofa::CartelThresholds th;  // theta_s 0.6, k 5, r 2
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto planted = fixture::planted_ledger(120, 3, 3 + seed % 3, 3, th.internal_share + 0.2,
                                                 th.internal_share - 0.2, seed);
    const auto flags = sofa::detect_cartels(planted.ledger, 120, th);
    std::set<std::vector<std::size_t>> found;
    for (const auto& f : flags) found.insert(f.members);
    const std::set<std::vector<std::size_t>> truth(planted.cartels.begin(), planted.cartels.end());
    CHECK(str(found) == str(truth));
  }
}

TEST_CASE("penalties") {
  sofa::CartelFlag flag;
  flag.members = {0, 1};
  sofa::AllocationPlan plan(3);
  plan.set_row(0, {{1, 0.5}, {2, 0.5}});
  plan.set_row(1, {{0, 1.0}});
  CHECK(sofa::apply_penalties(plan, {}, sofa::PenaltyPolicy::void_and_redistribute) == plan);
  CHECK_THROWS_AS(sofa::apply_penalties(plan, {flag}, sofa::PenaltyPolicy::void_and_redistribute),
                  sofa::EmptyRowError);
  plan.set_row(1, {{0, 0.5}, {2, 0.5}});
  for (auto policy : {sofa::PenaltyPolicy::void_and_redistribute, sofa::PenaltyPolicy::zero_internal_weights}) {
    const auto out = sofa::apply_penalties(plan, {flag}, policy);
    CHECK(out.weight(0, 2) == 1.0);
    CHECK(out.weight(1, 2) == 1.0);
    CHECK(out.weight(0, 1) == 0.0);
  }
}

TEST_CASE("audit finds planted conflicted transfers") {
  const auto c = with_affiliations(4, {"A", "A", "B", "C"});
  const auto cs = sofa::detect_conflicts(c, {}, 2024);
  sofa::DonationLedger ledger;
  ledger.add({1, 0, 2, 1.0});
  ledger.add({1, 2, 3, 1.0});
  auto report = sofa::audit_ledger(ledger, 4, cs, {});
  CHECK_FALSE(report.violation());
  CHECK_FALSE(report.cartel_history_sufficient);
  ledger.add({1, 0, 1, 2.5});
  report = sofa::audit_ledger(ledger, 4, cs, {});
  CHECK(report.violation());
  REQUIRE(report.conflicted_transfers.size() == 1);
  CHECK(report.conflicted_transfers[0].reasons == sofa::kSharedAffiliation);
  CHECK(report.conflicted_amount == 2.5);
  CHECK(report.total_amount == 4.5);
}

TEST_CASE("cartels: hub-heavy sparse ledger stays tractable" * doctest::timeout(10)) {
  // Every donor splits between one hub and one random agent; the hub has
  // in-degree ~N in the thresholded digraph.
  const std::size_t n = 20000;
  std::mt19937_64 rng(8);
  sofa::DonationLedger ledger;
  for (std::size_t r = 1; r <= 2; ++r) {
    for (std::size_t i = 0; i < n; ++i) {
      const std::size_t a = i == 0 ? 1 + rng() % (n - 1) : 0;
      std::size_t b = 1 + rng() % (n - 1);
      while (b == i || b == a) b = 1 + rng() % (n - 1);
      ledger.add({r, i, a, 0.5});
      ledger.add({r, i, b, 0.5});
    }
  }
  const sofa::CartelThresholds th;
  const auto flags = sofa::detect_cartels(ledger, n, th);
  for (const auto& f : flags) {
    CHECK(f.members.size() <= th.max_group_size);
    CHECK(f.score >= (f.kind == sofa::CartelKind::group ? th.internal_share : th.pair_reciprocity) - 1e-12);
  }
}
