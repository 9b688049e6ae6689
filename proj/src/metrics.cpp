#include "sofa/metrics.hpp"

#include <set>

namespace sofa {

std::map<std::string, double> per_group_shares(const Vector& x, const Community& community) {
  if (x.size() != static_cast<Eigen::Index>(community.size())) throw DimensionError("per_group_shares: size mismatch");
  const double total = x.sum();
  if (!(total > 0.0)) throw UndefinedInputError("per_group_shares: total is zero");
  std::map<std::string, double> out;
  for (std::size_t i = 0; i < community.size(); ++i) {
    for (const auto& tag : community.agent(i).group_tags) out[tag] += x[static_cast<Eigen::Index>(i)];
  }
  for (auto& [tag, sum] : out) sum /= total;
  return out;
}

MetricsReport compute_metrics(const Vector& retained, const Community& community, double budget,
                              std::size_t iterations, double final_residual) {
  if (retained.size() != static_cast<Eigen::Index>(community.size())) throw DimensionError("compute_metrics: size mismatch");
  Vector scientists(static_cast<Eigen::Index>(community.scientist_count()));
  Vector equal = Vector::Zero(retained.size());
  const double share = budget / static_cast<double>(community.scientist_count());
  Eigen::Index k = 0;
  for (std::size_t i = 0; i < community.size(); ++i) {
    if (community.agent(i).is_super_node()) continue;
    scientists[k++] = retained[static_cast<Eigen::Index>(i)];
    equal[static_cast<Eigen::Index>(i)] = share;
  }

  MetricsReport report;
  report.gini = gini(scientists);
  report.lorenz = lorenz(scientists, kLorenzPoints);
  for (double p : {1.0, 5.0, 10.0, 20.0, 50.0}) report.top_shares[p] = top_share(scientists, p);
  report.per_group_shares = per_group_shares(retained, community);
  report.iterations = iterations;
  report.final_residual = final_residual;
  report.total_retained = retained.sum();
  report.baseline_equal_split = std::move(equal);
  return report;
}

CostReport cost_model(const CostParams& params) {
  for (double v : {params.n_applications, params.cost_per_application, params.funds_distributed,
                   params.time_cost_unsuccessful, params.baseline_grant}) {
    if (!(v >= 0.0) || !std::isfinite(v)) throw ValidationError("cost model inputs must be nonnegative");
  }
  if (params.funds_distributed == 0.0 && params.time_cost_unsuccessful != 0.0) {
    throw UndefinedInputError("overhead ratio undefined: no funds distributed");
  }
  CostReport report;
  report.n_applications = params.n_applications;
  report.cost_per_application = params.cost_per_application;
  report.total_application_cost = params.n_applications * params.cost_per_application;
  report.baseline_grant = params.baseline_grant;
  report.overhead_ratio =
      params.funds_distributed == 0.0 ? 0.0 : params.time_cost_unsuccessful / params.funds_distributed;
  report.application_exceeds_grant = params.cost_per_application > params.baseline_grant;
  return report;
}

}  // namespace sofa
