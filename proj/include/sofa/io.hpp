#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "sofa/integrity.hpp"
#include "sofa/metrics.hpp"
#include "sofa/simulation.hpp"

namespace sofa {

inline constexpr std::string_view kToolVersion = "0.1.0";
inline constexpr int kConfigSchemaVersion = 1;

/// Exit codes of the command-line tool.
enum ExitCode : int {
  kExitOk = 0,
  kExitFailure = 1,
  kExitConfigInvalid = 2,
  kExitNoConvergence = 3,
  kExitIntegrityViolation = 4,
};

/// Parses a scenario document. Relative community paths resolve against
/// `base_dir`. Throws ConfigError carrying every issue found.
ScenarioConfig config_from_json(const nlohmann::json& doc, const std::filesystem::path& base_dir = {});
ScenarioConfig parse_and_validate_config(const std::filesystem::path& path);

/// Fully materialized document (every default written out).
nlohmann::json config_to_json(const ScenarioConfig& config);
/// SHA-256 of the canonical (key-sorted) materialized config.
std::string config_hash(const ScenarioConfig& config);

CommunitySpec community_spec_from_json(const nlohmann::json& doc);
nlohmann::json community_spec_to_json(const CommunitySpec& spec);

/// Locale-independent fixed notation with 9 fractional digits.
std::string format_fixed(double value);

std::string sha256_hex(std::string_view bytes);

/// round,agent_id,incoming_total,retained,donated, ordered by round then id.
std::string funding_csv(const ScenarioResult& result);
/// round,donor_id,recipient_id,amount, ordered by round, donor, recipient.
std::string transfers_csv(const DonationLedger& ledger, const Community& community);

nlohmann::json metrics_to_json(const MetricsReport& metrics, const Community& community);
nlohmann::json integrity_to_json(const IntegrityReport& report, const Community& community);
nlohmann::json cost_report_to_json(const CostReport& report);
CostParams cost_params_from_json(const nlohmann::json& doc);

struct OutputFile {
  std::string name;
  std::string sha256;
  std::uintmax_t bytes = 0;
};

struct RunManifest {
  std::string config_hash;
  std::uint64_t seed = 0;
  std::string tool_version;
  std::string started_at;
  std::string finished_at;
  std::vector<OutputFile> outputs;
};

nlohmann::json manifest_to_json(const RunManifest& manifest, const ScenarioConfig& config);

/// UTC ISO-8601 now, or SOURCE_DATE_EPOCH when that variable is set.
std::string timestamp_now();

/// Writes the run's file set plus manifest.json. Holds a lock file in
/// out_dir for the duration; a second writer fails with IoError.
RunManifest write_outputs(const ScenarioResult& result, const std::filesystem::path& out_dir,
                          std::string started_at = {});

/// Recomputes checksums of every file listed in out_dir/manifest.json.
/// Returns the names that do not match.
std::vector<std::string> verify_manifest(const std::filesystem::path& out_dir);

/// Exclusive lock file in a directory, released on destruction.
class DirectoryLock {
 public:
  explicit DirectoryLock(const std::filesystem::path& dir);
  ~DirectoryLock();
  DirectoryLock(const DirectoryLock&) = delete;
  DirectoryLock& operator=(const DirectoryLock&) = delete;

 private:
  std::filesystem::path path_;
};

DonationLedger read_transfers_csv(const std::filesystem::path& path, const Community& community);

struct FundingRow {
  std::size_t round = 0;
  std::string agent_id;
  double incoming_total = 0.0;
  double retained = 0.0;
  double donated = 0.0;
};

std::vector<FundingRow> read_funding_csv(const std::filesystem::path& path);

std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::string_view bytes);

}  // namespace sofa
