#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "sofa/error.hpp"
#include "sofa/population.hpp"
#include "sofa/types.hpp"

namespace sofa {

namespace detail {

template <typename Derived>
VectorX<typename Derived::Scalar> sorted_nonnegative(const Eigen::MatrixBase<Derived>& x, const char* what) {
  using Scalar = typename Derived::Scalar;
  VectorX<Scalar> v = x;
  if (v.size() == 0) throw UndefinedInputError(std::string(what) + ": empty input");
  if ((v.array() < Scalar(0)).any()) throw UndefinedInputError(std::string(what) + ": negative entry");
  if (!(v.sum() > Scalar(0))) throw UndefinedInputError(std::string(what) + ": total is zero");
  std::sort(v.data(), v.data() + v.size());
  return v;
}

}  // namespace detail

/// G = sum_i (2i - N - 1) x_(i) / (N sum x), x sorted ascending, i from 1.
/// Evaluated as sum_k k (N - k) (x_(k+1) - x_(k)): identical algebra, but
/// every term is nonnegative and equal inputs give exactly 0.
template <typename Derived>
typename Derived::Scalar gini(const Eigen::MatrixBase<Derived>& x) {
  using Scalar = typename Derived::Scalar;
  const auto v = detail::sorted_nonnegative(x, "gini");
  const auto n = v.size();
  Scalar weighted(0);
  for (Eigen::Index k = 1; k < n; ++k) weighted += Scalar(k) * Scalar(n - k) * (v[k] - v[k - 1]);
  return weighted / (Scalar(n) * v.sum());
}

/// (population share, funding share) from the poorest up; starts at (0,0),
/// ends at (1,1). With max_points > 1 the curve is sampled at that many
/// evenly spaced ranks.
template <typename Derived>
std::vector<std::pair<double, double>> lorenz(const Eigen::MatrixBase<Derived>& x, std::size_t max_points = 0) {
  const auto v = detail::sorted_nonnegative(x, "lorenz");
  const auto n = static_cast<std::size_t>(v.size());
  const double total = static_cast<double>(v.sum());
  std::vector<double> cumulative(n + 1, 0.0);
  for (std::size_t i = 0; i < n; ++i) cumulative[i + 1] = cumulative[i] + static_cast<double>(v[static_cast<Eigen::Index>(i)]);

  std::vector<std::pair<double, double>> points;
  auto emit = [&](std::size_t k) {
    points.emplace_back(static_cast<double>(k) / static_cast<double>(n), k == n ? 1.0 : cumulative[k] / total);
  };
  if (max_points < 2 || max_points > n + 1) {
    for (std::size_t k = 0; k <= n; ++k) emit(k);
  } else {
    for (std::size_t s = 0; s < max_points; ++s) emit(s * n / (max_points - 1));
  }
  return points;
}

/// Share held by the richest ceil(percent * N / 100) entries.
template <typename Derived>
double top_share(const Eigen::MatrixBase<Derived>& x, double percent) {
  if (!(percent > 0.0 && percent <= 100.0)) throw UndefinedInputError("top_share: percent must be in (0,100]");
  const auto v = detail::sorted_nonnegative(x, "top_share");
  const auto n = static_cast<std::size_t>(v.size());
  auto count = static_cast<std::size_t>(std::ceil(percent * static_cast<double>(n) / 100.0 - 1e-9));
  count = std::clamp<std::size_t>(count, 1, n);
  if (count == n) return 1.0;
  double top = 0.0;
  for (std::size_t k = n - count; k < n; ++k) top += static_cast<double>(v[static_cast<Eigen::Index>(k)]);
  return top / static_cast<double>(v.sum());
}

/// Share of the total held by agents carrying each tag present in the community.
std::map<std::string, double> per_group_shares(const Vector& x, const Community& community);

struct MetricsReport {
  /// Inequality of retained funds across scientists.
  double gini = 0.0;
  std::vector<std::pair<double, double>> lorenz;
  std::map<double, double> top_shares;  // percent -> share
  std::map<std::string, double> per_group_shares;
  std::size_t iterations = 0;
  double final_residual = 0.0;
  double total_retained = 0.0;
  Vector baseline_equal_split;
};

inline constexpr std::size_t kLorenzPoints = 1001;

MetricsReport compute_metrics(const Vector& retained, const Community& community, double budget,
                              std::size_t iterations, double final_residual);

struct CostParams {
  double n_applications = 0.0;
  double cost_per_application = 0.0;
  double funds_distributed = 0.0;
  double time_cost_unsuccessful = 0.0;
  double baseline_grant = 0.0;
};

struct CostReport {
  double n_applications = 0.0;
  double cost_per_application = 0.0;
  double total_application_cost = 0.0;
  double baseline_grant = 0.0;
  /// time_cost_unsuccessful / funds_distributed.
  double overhead_ratio = 0.0;
  bool application_exceeds_grant = false;
};

CostReport cost_model(const CostParams& params);

}  // namespace sofa
