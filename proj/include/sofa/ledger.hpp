#pragma once

#include <cstddef>
#include <vector>

#include "sofa/plan.hpp"
#include "sofa/types.hpp"

namespace sofa {

struct Transfer {
  std::size_t round = 0;
  std::size_t donor = 0;
  std::size_t recipient = 0;
  double amount = 0.0;

  friend bool operator==(const Transfer&, const Transfer&) = default;
};

/// Ordered record of realized transfers.
class DonationLedger {
 public:
  void add(const Transfer& t);
  /// Records every w_ij * f_i * T_i > 0 for the given round.
  void record_round(std::size_t round, const AllocationPlan& plan, const Vector& fractions,
                    const Vector& totals);
  void append(const DonationLedger& other);

  const std::vector<Transfer>& records() const noexcept { return records_; }
  bool empty() const noexcept { return records_.empty(); }
  std::size_t first_round() const;
  std::size_t last_round() const;
  /// last_round - first_round + 1, or 0 when empty.
  std::size_t round_span() const;

 private:
  std::vector<Transfer> records_;
};

}  // namespace sofa
