#pragma once

#include <cstddef>
#include <functional>
#include <string>
#include <vector>

#include <Eigen/LU>

#include "sofa/error.hpp"
#include "sofa/ledger.hpp"
#include "sofa/plan.hpp"
#include "sofa/population.hpp"
#include "sofa/types.hpp"

namespace sofa {

/// Funding of one round. Donations of this round's pool (donated_pool) are
/// received in the next round.
struct FundingState {
  std::size_t round_index = 0;
  Vector incoming_total;
  Vector retained;
  Vector donated_pool;
  Vector base;
};

struct FixedPointResult {
  Vector totals;
  Vector retained;
  std::size_t iterations = 0;
  /// L1 change of the totals per iteration, divided by the budget.
  std::vector<double> residual_history;
  bool converged = false;

  double final_residual() const { return residual_history.empty() ? 0.0 : residual_history.back(); }
};

inline constexpr std::size_t kDenseSolveLimit = 5000;

/// Uniform preference over scientists; zero on super-nodes.
Vector uniform_public_preference(const Community& community);

/// Equal split of (1 - p) * budget over scientists plus p * budget placed by
/// the public preference q. Super-nodes get nothing.
Vector base_vector(double budget, const Community& community, double public_fraction,
                   const Vector& public_pref);

FundingState initial_state(const Vector& base, const Vector& fractions, std::size_t round_index = 0);

/// One round of circulation: T' = base + W^T (f .* T). The transfers made
/// out of prev's pools are logged under prev.round_index.
FundingState donation_step(const FundingState& prev, const AllocationPlan& plan, const Vector& fractions,
                           const Vector& base, DonationLedger* ledger = nullptr);

/// Iterates the donation map from T0 = base until the normalized L1 change
/// drops to `tolerance` or `max_iter` passes are spent.
FixedPointResult run_fixed_point(const AllocationPlan& plan, const Vector& fractions, const Vector& base,
                                 double tolerance, std::size_t max_iter);

/// The k-th iterate of the donation map, with iterate 0 = base.
Vector iterate_totals(const AllocationPlan& plan, const Vector& fractions, const Vector& base, std::size_t k);

/// Throws on dimension mismatch, fractions outside [0,1), negative base,
/// or a donor with positive fraction and no recipients.
void validate_mechanism_inputs(const AllocationPlan& plan, const Vector& fractions, const Vector& base);

template <typename DerivedT, typename DerivedF>
VectorX<typename DerivedT::Scalar> retained(const Eigen::MatrixBase<DerivedT>& totals,
                                            const Eigen::MatrixBase<DerivedF>& fractions) {
  if (totals.size() != fractions.size()) throw DimensionError("retained: size mismatch");
  using Scalar = typename DerivedT::Scalar;
  return ((Scalar(1) - fractions.array().template cast<Scalar>()) * totals.array()).matrix();
}

/// Stationary totals by dense LU: (I - W^T diag(f)) T = base. Refuses
/// populations above kDenseSolveLimit.
template <typename Scalar = double>
VectorX<Scalar> closed_form_totals(const AllocationPlan& plan, const VectorX<Scalar>& fractions,
                                   const VectorX<Scalar>& base) {
  const auto n = static_cast<Eigen::Index>(plan.size());
  if (plan.size() > kDenseSolveLimit) {
    throw DenseSizeError("closed_form_totals: " + std::to_string(plan.size()) + " agents exceeds the dense limit of " +
                         std::to_string(kDenseSolveLimit) + "; use run_fixed_point");
  }
  if (fractions.size() != n || base.size() != n) throw DimensionError("closed_form_totals: size mismatch");
  for (Eigen::Index i = 0; i < n; ++i) {
    if (!(fractions[i] >= Scalar(0) && fractions[i] < Scalar(1))) {
      throw ValidationError("donation fractions must lie in [0,1)");
    }
  }
  MatrixX<Scalar> system = MatrixX<Scalar>::Identity(n, n);
  for (std::size_t i = 0; i < plan.size(); ++i) {
    const auto col = static_cast<Eigen::Index>(i);
    for (const auto& e : plan.row(i)) {
      system(static_cast<Eigen::Index>(e.recipient), col) -= static_cast<Scalar>(e.weight) * fractions[col];
    }
  }
  return system.partialPivLu().solve(base);
}

struct TwoPhaseResult {
  FixedPointResult interim;
  FixedPointResult final;
  AllocationPlan phase2_plan;
};

/// Produces the phase-2 plan once interim totals are published.
using RevisionFn = std::function<AllocationPlan(const Community&, const Vector& interim_totals)>;

/// Runs phase 1 to convergence, publishes its totals to `revise`, then runs
/// the revised plan. Throws ConvergenceError if either phase fails.
TwoPhaseResult two_phase_round(const Community& community, const AllocationPlan& phase1_plan,
                               const RevisionFn& revise, const Vector& fractions, const Vector& base,
                               double tolerance, std::size_t max_iter);

}  // namespace sofa
