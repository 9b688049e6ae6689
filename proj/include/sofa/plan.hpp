#pragma once

#include <cstddef>
#include <vector>

#include <Eigen/Sparse>

namespace sofa {

struct PlanEntry {
  std::size_t recipient = 0;
  double weight = 0.0;

  friend bool operator==(const PlanEntry&, const PlanEntry&) = default;
};

/// Recipient-sorted, normalized weights of one donor.
using PlanRow = std::vector<PlanEntry>;

/// Sorts by recipient, merges duplicates and rescales to unit sum.
/// Throws ValidationError on non-positive or non-finite weights.
PlanRow normalized_row(PlanRow row);

/// Row-stochastic sparse donation weights, one row per agent. An empty row
/// marks an agent that does not donate (super-nodes, f = 0).
class AllocationPlan {
 public:
  explicit AllocationPlan(std::size_t n_agents = 0) : rows_(n_agents) {}

  std::size_t size() const noexcept { return rows_.size(); }
  const PlanRow& row(std::size_t donor) const { return rows_.at(donor); }
  const std::vector<PlanRow>& rows() const noexcept { return rows_; }

  /// Normalizes and validates against self-allocation and index range.
  void set_row(std::size_t donor, PlanRow row);
  void clear_row(std::size_t donor) { rows_.at(donor).clear(); }

  bool is_donor(std::size_t agent) const { return !rows_.at(agent).empty(); }
  double weight(std::size_t donor, std::size_t recipient) const;
  std::size_t nonzeros() const noexcept;

  /// W with W(i, j) = weight of donor i on recipient j.
  Eigen::SparseMatrix<double, Eigen::RowMajor> matrix() const;

  friend bool operator==(const AllocationPlan&, const AllocationPlan&) = default;

 private:
  std::vector<PlanRow> rows_;
};

}  // namespace sofa
