#include <algorithm>
#include <cmath>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "sofa/error.hpp"
#include "sofa/integrity.hpp"
#include "sofa/io.hpp"
#include "sofa/mechanism.hpp"
#include "sofa/metrics.hpp"
#include "sofa/policy.hpp"
#include "sofa/population.hpp"
#include "sofa/simulation.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct GlobalOptions {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out_dir;
  std::optional<double> tolerance;
  std::optional<std::size_t> max_iter;
};

sofa::ScenarioConfig load_config(const GlobalOptions& g) {
  sofa::ScenarioConfig c = g.config.empty() ? sofa::config_from_json(json::object())
                                            : sofa::parse_and_validate_config(g.config);
  if (g.seed) c.seed = *g.seed;
  if (!g.out_dir.empty()) c.output_dir = g.out_dir;
  if (g.tolerance) c.policy.tolerance = *g.tolerance;
  if (g.max_iter) c.policy.max_iter = *g.max_iter;
  std::vector<sofa::ConfigIssue> issues;
  for (auto& i : c.policy.issues()) issues.push_back({"/policy" + i.path, i.message});
  if (!issues.empty()) throw sofa::ConfigError(std::move(issues));
  return c;
}

void print_json(const json& j) { std::cout << j.dump(2) << "\n"; }

int cmd_generate(const GlobalOptions& g, const std::string& output) {
  const auto config = load_config(g);
  const auto community = sofa::build_community(config);
  const fs::path target = output.empty() ? fs::path(config.output_dir) / "community.json" : fs::path(output);
  if (target.has_parent_path()) fs::create_directories(target.parent_path());
  sofa::save_community(community, target);
  std::cout << "wrote " << target.string() << " (" << community.size() << " agents, "
            << community.coauthor_edges().size() << " coauthor edges)\n";
  return sofa::kExitOk;
}

int cmd_run(const GlobalOptions& g) {
  const auto started = sofa::timestamp_now();
  const auto config = load_config(g);
  const auto result = sofa::run_scenario(config);
  const auto manifest = sofa::write_outputs(result, config.output_dir, started);
  for (const auto& w : result.warnings) std::cerr << "warning: " << w << "\n";
  std::cout << "wrote " << manifest.outputs.size() + 1 << " files to " << config.output_dir.string() << "\n";
  if (result.failed) {
    std::cerr << "error: " << result.failure << "\n";
    return sofa::kExitNoConvergence;
  }
  std::cout << "gini(retained) = " << sofa::format_fixed(result.metrics.gini) << "\n";
  return sofa::kExitOk;
}

int cmd_sweep(const GlobalOptions& g, const std::vector<double>& f_values) {
  const auto config = load_config(g);
  const auto points = sofa::sweep(config, f_values);
  std::string csv = "fraction,gini,top10_share,iterations,final_residual,error\n";
  bool any_failed = false;
  for (const auto& p : points) {
    csv += sofa::format_fixed(p.fraction) + ",";
    if (p.metrics) {
      csv += sofa::format_fixed(p.metrics->gini) + "," + sofa::format_fixed(p.metrics->top_shares.at(10.0)) + "," +
             std::to_string(p.metrics->iterations) + "," + sofa::format_fixed(p.metrics->final_residual) + ",";
    } else {
      csv += ",,,,";
    }
    std::string error = p.error;
    std::replace(error.begin(), error.end(), ',', ';');
    csv += error + "\n";
    any_failed = any_failed || !p.error.empty();
  }
  fs::create_directories(config.output_dir);
  sofa::write_file(fs::path(config.output_dir) / "sweep.csv", csv);
  std::cout << csv;
  return any_failed ? sofa::kExitNoConvergence : sofa::kExitOk;
}

int cmd_audit(const GlobalOptions& g, const std::string& transfers, const std::string& community_path) {
  const auto config = load_config(g);
  const auto community = sofa::load_community(community_path);
  const auto ledger = sofa::read_transfers_csv(transfers, community);
  const auto& policy = config.policy;
  const auto conflicts = sofa::detect_conflicts(community, policy.coi, policy.evaluation_year);
  const auto report = sofa::audit_ledger(ledger, community.size(), conflicts, policy.cartel);
  const json doc = sofa::integrity_to_json(report, community);
  fs::create_directories(config.output_dir);
  sofa::write_file(fs::path(config.output_dir) / "integrity_report.json", doc.dump(2) + "\n");
  print_json(doc.at("totals"));
  return report.violation() ? sofa::kExitIntegrityViolation : sofa::kExitOk;
}

int cmd_verify(const GlobalOptions& g) {
  const auto config = load_config(g);
  const auto community = sofa::build_community(config);
  if (community.size() > sofa::kDenseSolveLimit) {
    throw sofa::DenseSizeError("verify needs N <= " + std::to_string(sofa::kDenseSolveLimit) + ", got " +
                               std::to_string(community.size()));
  }
  const auto& policy = config.policy;
  const sofa::Vector f = sofa::resolve_fractions(community, policy, nullptr);
  const sofa::Vector beta = sofa::base_vector(policy.total_budget, community, policy.public_fraction,
                                              sofa::resolve_public_preference(community, policy));
  const auto conflicts = sofa::detect_conflicts(community, policy.coi, policy.evaluation_year);
  const sofa::VisibleState visible{beta, 1};
  const sofa::ProposalContext ctx{community, visible, conflicts, config.seed, policy.evaluation_year,
                                  policy.coi.fallback_uniform_domain};
  auto plan = sofa::propose_plans(config.strategy, ctx);
  plan = sofa::apply_group_multiplier(plan, community, policy.group_multipliers);

  const double eps = std::min(policy.tolerance, 1e-12);
  const auto fp = sofa::run_fixed_point(plan, f, beta, eps, policy.max_iter);
  const sofa::Vector exact = sofa::closed_form_totals(plan, f, beta);
  const double diff = (fp.totals - exact).lpNorm<Eigen::Infinity>();
  const double bound = 1e-8 * policy.total_budget;
  const bool ok = fp.converged && diff <= bound;
  print_json({{"agents", community.size()},
              {"tolerance", eps},
              {"iterations", fp.iterations},
              {"converged", fp.converged},
              {"max_abs_difference", diff},
              {"bound", bound},
              {"pass", ok}});
  if (!fp.converged) return sofa::kExitNoConvergence;
  return ok ? sofa::kExitOk : sofa::kExitFailure;
}

int cmd_report(const GlobalOptions& g, const std::string& cost_config) {
  json out = json::object();
  const fs::path dir = g.out_dir.empty() ? fs::path("out") : fs::path(g.out_dir);
  const bool have_run = fs::exists(dir / "manifest.json");
  if (have_run) {
    const auto mismatched = sofa::verify_manifest(dir);
    if (!mismatched.empty()) {
      for (const auto& name : mismatched) std::cerr << "checksum mismatch: " << (dir / name).string() << "\n";
      return sofa::kExitFailure;
    }
    const json manifest = json::parse(sofa::read_file(dir / "manifest.json"));
    const auto config = sofa::config_from_json(manifest.at("config"));
    const auto community = sofa::build_community(config);
    const auto rows = sofa::read_funding_csv(dir / "funding_per_round.csv");
    if (rows.empty()) throw sofa::FormatError("funding_per_round.csv has no rows");
    const std::size_t last = rows.back().round;
    sofa::Vector retained = sofa::Vector::Zero(static_cast<Eigen::Index>(community.size()));
    for (const auto& r : rows) {
      if (r.round != last) continue;
      retained[static_cast<Eigen::Index>(community.require_index(r.agent_id))] = r.retained;
    }
    const json stored = json::parse(sofa::read_file(dir / "metrics.json"));
    const auto& conv = stored.at("convergence");
    const auto metrics = sofa::compute_metrics(retained, community, config.policy.total_budget,
                                               conv.at("iterations").get<std::size_t>(),
                                               conv.at("final_residual").get<double>());
    out["run"] = {{"directory", dir.string()},
                  {"config_hash", manifest.at("config_hash")},
                  {"rounds", last},
                  {"checksums", "ok"}};
    out["metrics"] = sofa::metrics_to_json(metrics, community);
    out["metrics"].erase("lorenz");
    out["metrics"].erase("baseline_equal_split");
  }
  if (!cost_config.empty()) {
    const auto params = sofa::cost_params_from_json(json::parse(sofa::read_file(cost_config)));
    out["cost"] = sofa::cost_report_to_json(sofa::cost_model(params));
  }
  if (!have_run && cost_config.empty()) {
    throw sofa::IoError("nothing to report: no manifest.json in " + dir.string() + " and no --cost-config");
  }
  print_json(out);
  if (have_run) sofa::write_file(dir / "report.json", out.dump(2) + "\n");
  return sofa::kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Simulate self-organized funding allocation: equal base grants plus fractional peer donations"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(sofa::kToolVersion));

  GlobalOptions g;
  app.add_option("--config", g.config, "Scenario config (JSON)")->check(CLI::ExistingFile);
  app.add_option("--seed", g.seed, "Master seed, overrides the config");
  app.add_option("--out-dir", g.out_dir, "Output directory, overrides the config");
  app.add_option("--tolerance", g.tolerance, "Fixed-point tolerance on L1(dT)/B");
  app.add_option("--max-iter", g.max_iter, "Fixed-point iteration cap");
  for (auto* opt : app.get_options()) opt->configurable(false);
  app.fallthrough();

  std::string output;
  auto* generate = app.add_subcommand("generate", "Synthesize a community and write community.json");
  generate->add_option("--output", output, "Target file (default <out-dir>/community.json)");

  auto* run = app.add_subcommand("run", "Run a scenario and write its output file set");

  std::vector<double> f_values{0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9};
  auto* sweep = app.add_subcommand("sweep", "Run the scenario over a grid of default fractions");
  sweep->add_option("--f-values", f_values, "Comma-separated fractions")->delimiter(',');

  std::string transfers;
  std::string community;
  auto* audit = app.add_subcommand("audit", "Check a transfers ledger for conflicts and cartels");
  audit->add_option("--transfers", transfers, "transfers.csv")->required()->check(CLI::ExistingFile);
  audit->add_option("--community", community, "community.json")->required()->check(CLI::ExistingFile);

  auto* verify = app.add_subcommand("verify", "Compare fixed-point iteration with the dense solve (N <= 5000)");

  std::string cost_config;
  auto* report = app.add_subcommand("report", "Summarize stored outputs and optional cost figures");
  report->add_option("--cost-config", cost_config, "Cost model parameters (JSON)")->check(CLI::ExistingFile);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? sofa::kExitOk : sofa::kExitConfigInvalid;
  }

  try {
    if (*generate) return cmd_generate(g, output);
    if (*run) return cmd_run(g);
    if (*sweep) return cmd_sweep(g, f_values);
    if (*audit) return cmd_audit(g, transfers, community);
    if (*verify) return cmd_verify(g);
    if (*report) return cmd_report(g, cost_config);
  } catch (const sofa::ConfigError& e) {
    for (const auto& issue : e.issues()) {
      std::cerr << "config error: " << (issue.path.empty() ? "/" : issue.path) << ": " << issue.message << "\n";
    }
    return sofa::kExitConfigInvalid;
  } catch (const sofa::ConvergenceError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return sofa::kExitNoConvergence;
  } catch (const sofa::ValidationError& e) {
    std::cerr << "invalid scenario: " << e.what() << "\n";
    return sofa::kExitConfigInvalid;
  } catch (const sofa::EmptyRowError& e) {
    std::cerr << "invalid scenario: " << e.what() << "\n";
    return sofa::kExitConfigInvalid;
  } catch (const sofa::EmptyTargetError& e) {
    std::cerr << "invalid scenario: " << e.what() << "\n";
    return sofa::kExitConfigInvalid;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return sofa::kExitFailure;
  }
  return sofa::kExitFailure;
}
