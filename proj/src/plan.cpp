#include "sofa/plan.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "sofa/error.hpp"
#include "sofa/ledger.hpp"

namespace sofa {

PlanRow normalized_row(PlanRow row) {
  std::sort(row.begin(), row.end(),
            [](const PlanEntry& a, const PlanEntry& b) { return a.recipient < b.recipient; });
  PlanRow merged;
  merged.reserve(row.size());
  for (const auto& e : row) {
    if (!(e.weight > 0.0) || !std::isfinite(e.weight)) {
      throw ValidationError("plan weights must be positive and finite",
                            {"recipient #" + std::to_string(e.recipient)});
    }
    if (!merged.empty() && merged.back().recipient == e.recipient) {
      merged.back().weight += e.weight;
    } else {
      merged.push_back(e);
    }
  }
  double total = 0.0;
  for (const auto& e : merged) total += e.weight;
  for (auto& e : merged) e.weight /= total;
  return merged;
}

void AllocationPlan::set_row(std::size_t donor, PlanRow row) {
  if (donor >= rows_.size()) throw DimensionError("donor index out of range");
  for (const auto& e : row) {
    if (e.recipient >= rows_.size()) throw DimensionError("recipient index out of range");
    if (e.recipient == donor) {
      throw ValidationError("self-allocation is not allowed", {"#" + std::to_string(donor)});
    }
  }
  rows_[donor] = normalized_row(std::move(row));
}

double AllocationPlan::weight(std::size_t donor, std::size_t recipient) const {
  const auto& r = rows_.at(donor);
  auto it = std::lower_bound(r.begin(), r.end(), recipient,
                             [](const PlanEntry& e, std::size_t j) { return e.recipient < j; });
  return (it != r.end() && it->recipient == recipient) ? it->weight : 0.0;
}

std::size_t AllocationPlan::nonzeros() const noexcept {
  std::size_t n = 0;
  for (const auto& r : rows_) n += r.size();
  return n;
}

Eigen::SparseMatrix<double, Eigen::RowMajor> AllocationPlan::matrix() const {
  const auto n = static_cast<Eigen::Index>(rows_.size());
  Eigen::SparseMatrix<double, Eigen::RowMajor> w(n, n);
  std::vector<Eigen::Index> per_row(rows_.size());
  for (std::size_t i = 0; i < rows_.size(); ++i) per_row[i] = static_cast<Eigen::Index>(rows_[i].size());
  w.reserve(per_row);
  for (std::size_t i = 0; i < rows_.size(); ++i) {
    for (const auto& e : rows_[i]) {
      w.insert(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(e.recipient)) = e.weight;
    }
  }
  w.makeCompressed();
  return w;
}

// ---------------------------------------------------------------------------

void DonationLedger::add(const Transfer& t) {
  if (!(t.amount > 0.0)) throw ValidationError("ledger amounts must be positive");
  records_.push_back(t);
}

void DonationLedger::record_round(std::size_t round, const AllocationPlan& plan, const Vector& fractions,
                                  const Vector& totals) {
  for (std::size_t i = 0; i < plan.size(); ++i) {
    const double pool = fractions[static_cast<Eigen::Index>(i)] * totals[static_cast<Eigen::Index>(i)];
    if (!(pool > 0.0)) continue;
    for (const auto& e : plan.row(i)) {
      const double amount = e.weight * pool;
      if (amount > 0.0) records_.push_back({round, i, e.recipient, amount});
    }
  }
}

void DonationLedger::append(const DonationLedger& other) {
  records_.insert(records_.end(), other.records_.begin(), other.records_.end());
}

std::size_t DonationLedger::first_round() const {
  std::size_t r = records_.empty() ? 0 : records_.front().round;
  for (const auto& t : records_) r = std::min(r, t.round);
  return r;
}

std::size_t DonationLedger::last_round() const {
  std::size_t r = 0;
  for (const auto& t : records_) r = std::max(r, t.round);
  return r;
}

std::size_t DonationLedger::round_span() const {
  return records_.empty() ? 0 : last_round() - first_round() + 1;
}

}  // namespace sofa
