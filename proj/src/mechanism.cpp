#include "sofa/mechanism.hpp"

#include <cmath>
#include <string>

namespace sofa {

Vector uniform_public_preference(const Community& community) {
  Vector q = Vector::Zero(static_cast<Eigen::Index>(community.size()));
  const auto ns = community.scientist_count();
  if (ns == 0) return q;
  for (std::size_t i = 0; i < community.size(); ++i) {
    if (!community.agent(i).is_super_node()) q[static_cast<Eigen::Index>(i)] = 1.0 / static_cast<double>(ns);
  }
  return q;
}

Vector base_vector(double budget, const Community& community, double public_fraction, const Vector& public_pref) {
  if (!(budget > 0.0) || !std::isfinite(budget)) throw ValidationError("budget must be positive");
  if (!(public_fraction >= 0.0 && public_fraction <= 1.0)) throw ValidationError("public fraction must lie in [0,1]");
  const auto n = static_cast<Eigen::Index>(community.size());
  if (public_pref.size() != n) throw DimensionError("public preference size mismatch");
  const auto ns = community.scientist_count();
  if (ns == 0) throw ValidationError("community has no scientists to fund");

  double mass = 0.0;
  std::vector<std::string> misplaced;
  for (Eigen::Index i = 0; i < n; ++i) {
    const double q = public_pref[i];
    if (!(q >= 0.0)) misplaced.push_back(community.agent(static_cast<std::size_t>(i)).id);
    if (q != 0.0 && community.agent(static_cast<std::size_t>(i)).is_super_node()) {
      misplaced.push_back(community.agent(static_cast<std::size_t>(i)).id);
    }
    mass += q;
  }
  if (!misplaced.empty()) {
    throw ValidationError("public preference must be nonnegative and on scientists only", misplaced);
  }
  if (std::abs(mass - 1.0) > 1e-9) throw ValidationError("public preference must sum to 1");

  const double equal_share = (1.0 - public_fraction) * budget / static_cast<double>(ns);
  Vector beta(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    beta[i] = community.agent(static_cast<std::size_t>(i)).is_super_node()
                  ? 0.0
                  : equal_share + public_fraction * budget * public_pref[i];
  }
  return beta;
}

void validate_mechanism_inputs(const AllocationPlan& plan, const Vector& fractions, const Vector& base) {
  const auto n = static_cast<Eigen::Index>(plan.size());
  if (fractions.size() != n || base.size() != n) throw DimensionError("plan, fractions and base sizes differ");
  for (Eigen::Index i = 0; i < n; ++i) {
    if (!(fractions[i] >= 0.0 && fractions[i] < 1.0)) {
      throw ValidationError("donation fractions must lie in [0,1)", {"#" + std::to_string(i)});
    }
    if (!(base[i] >= 0.0) || !std::isfinite(base[i])) {
      throw ValidationError("base funding must be nonnegative", {"#" + std::to_string(i)});
    }
    if (fractions[i] > 0.0 && !plan.is_donor(static_cast<std::size_t>(i))) {
      throw EmptyRowError(static_cast<std::size_t>(i),
                          "agent #" + std::to_string(i) + " must donate but has no recipients");
    }
  }
}

FundingState initial_state(const Vector& base, const Vector& fractions, std::size_t round_index) {
  if (base.size() != fractions.size()) throw DimensionError("initial_state: size mismatch");
  FundingState s;
  s.round_index = round_index;
  s.base = base;
  s.incoming_total = base;
  s.retained = retained(base, fractions);
  s.donated_pool = fractions.cwiseProduct(base);
  return s;
}

FundingState donation_step(const FundingState& prev, const AllocationPlan& plan, const Vector& fractions,
                           const Vector& base, DonationLedger* ledger) {
  validate_mechanism_inputs(plan, fractions, base);
  if (prev.incoming_total.size() != base.size()) throw DimensionError("donation_step: state size mismatch");
  if ((prev.incoming_total.array() < 0.0).any()) throw ValidationError("incoming totals must be nonnegative");

  const Vector pools = fractions.cwiseProduct(prev.incoming_total);
  if (ledger) ledger->record_round(prev.round_index, plan, fractions, prev.incoming_total);

  FundingState next;
  next.round_index = prev.round_index + 1;
  next.base = base;
  next.incoming_total = base + plan.matrix().transpose() * pools;
  next.retained = retained(next.incoming_total, fractions);
  next.donated_pool = fractions.cwiseProduct(next.incoming_total);
  return next;
}

FixedPointResult run_fixed_point(const AllocationPlan& plan, const Vector& fractions, const Vector& base,
                                 double tolerance, std::size_t max_iter) {
  if (!(tolerance > 0.0)) throw ValidationError("tolerance must be positive");
  if (max_iter < 1) throw ValidationError("max_iter must be >= 1");
  validate_mechanism_inputs(plan, fractions, base);
  const double budget = base.sum();
  if (!(budget > 0.0)) throw ValidationError("base vector must carry a positive budget");

  // W^T diag(f), built once; each pass is one sparse mat-vec.
  const Eigen::SparseMatrix<double> flow = plan.matrix().transpose() * fractions.asDiagonal();

  FixedPointResult result;
  Vector totals = base;
  Vector next(base.size());
  while (result.iterations < max_iter) {
    next.noalias() = flow * totals;
    next += base;
    ++result.iterations;
    const double residual = (next - totals).lpNorm<1>() / budget;
    result.residual_history.push_back(residual);
    totals.swap(next);
    if (residual <= tolerance) {
      result.converged = true;
      break;
    }
  }
  result.retained = retained(totals, fractions);
  result.totals = std::move(totals);
  return result;
}

Vector iterate_totals(const AllocationPlan& plan, const Vector& fractions, const Vector& base, std::size_t k) {
  validate_mechanism_inputs(plan, fractions, base);
  const Eigen::SparseMatrix<double> flow = plan.matrix().transpose() * fractions.asDiagonal();
  Vector totals = base;
  for (std::size_t i = 0; i < k; ++i) totals = base + flow * totals;
  return totals;
}

TwoPhaseResult two_phase_round(const Community& community, const AllocationPlan& phase1_plan,
                               const RevisionFn& revise, const Vector& fractions, const Vector& base,
                               double tolerance, std::size_t max_iter) {
  TwoPhaseResult out{run_fixed_point(phase1_plan, fractions, base, tolerance, max_iter), {}, phase1_plan};
  if (!out.interim.converged) {
    throw ConvergenceError("two-phase round: phase 1 did not converge within " + std::to_string(max_iter) +
                           " iterations");
  }
  out.phase2_plan = revise(community, out.interim.totals);
  out.final = run_fixed_point(out.phase2_plan, fractions, base, tolerance, max_iter);
  if (!out.final.converged) {
    throw ConvergenceError("two-phase round: phase 2 did not converge within " + std::to_string(max_iter) +
                           " iterations");
  }
  return out;
}

}  // namespace sofa
