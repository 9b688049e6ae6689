#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include <json.hpp>

namespace sofa {

inline constexpr int kCommunitySchemaVersion = 1;

enum class AgentKind { scientist, super_node };

struct Agent {
  std::string id;
  AgentKind kind = AgentKind::scientist;
  std::set<std::string> group_tags;
  int birth_year = 1980;
  std::string domain_id;
  std::set<std::string> affiliation_ids;
  /// Latent productivity; read only by synthetic strategies.
  double merit = 0.0;
  /// Per-agent donation fraction, wins over group overrides.
  std::optional<double> fraction_override;

  bool is_super_node() const noexcept { return kind == AgentKind::super_node; }
  bool has_tag(std::string_view tag) const;

  friend bool operator==(const Agent&, const Agent&) = default;
};

/// Undirected coauthorship edge between agent indices, stored with a < b.
struct CoauthorEdge {
  std::size_t a = 0;
  std::size_t b = 0;
  int last_year = 0;

  friend bool operator==(const CoauthorEdge&, const CoauthorEdge&) = default;
};

/// Immutable, validated population. Agent order is the index order used by
/// every vector and plan in the library.
class Community {
 public:
  Community() = default;

  /// Validates invariants; throws ValidationError listing offending ids.
  /// Edges are canonicalized (a < b, sorted, duplicates keep the latest year).
  Community(std::vector<Agent> agents, std::vector<CoauthorEdge> edges);

  std::size_t size() const noexcept { return agents_.size(); }
  const std::vector<Agent>& agents() const noexcept { return agents_; }
  const Agent& agent(std::size_t i) const { return agents_.at(i); }
  const std::vector<CoauthorEdge>& coauthor_edges() const noexcept { return edges_; }

  std::optional<std::size_t> index_of(std::string_view id) const;
  std::size_t require_index(std::string_view id) const;

  std::size_t scientist_count() const noexcept { return scientist_count_; }
  /// Sorted distinct domain ids.
  std::vector<std::string> domains() const;
  std::vector<std::size_t> members_of_domain(std::string_view domain_id) const;

  friend bool operator==(const Community& lhs, const Community& rhs) {
    return lhs.agents_ == rhs.agents_ && lhs.edges_ == rhs.edges_;
  }

 private:
  std::vector<Agent> agents_;
  std::vector<CoauthorEdge> edges_;
  std::unordered_map<std::string, std::size_t> index_;
  std::size_t scientist_count_ = 0;
};

struct CommunitySpec {
  std::size_t n_agents = 100;
  std::size_t n_affiliations = 10;
  std::size_t n_domains = 3;
  /// tag family -> (label -> proportion); at most one label per family per agent.
  std::map<std::string, std::map<std::string, double>> group_tag_proportions;
  double coauthor_mean_degree = 4.0;
  double intra_domain_share = 0.8;
  double merit_log_mean = 0.0;
  double merit_log_sd = 1.0;
  int first_birth_year = 1950;
  int last_birth_year = 1998;
  int first_coauthor_year = 2000;
  int last_coauthor_year = 2024;

  /// Throws ConfigError with every issue found.
  void validate() const;

  friend bool operator==(const CommunitySpec&, const CommunitySpec&) = default;
};

/// Deterministic in (spec, seed).
Community generate_community(const CommunitySpec& spec, std::uint64_t seed);

nlohmann::json community_to_json(const Community& community);
/// Throws FormatError on schema mismatch, ValidationError on invariant failure.
Community community_from_json(const nlohmann::json& doc);

Community load_community(const std::filesystem::path& path);
void save_community(const Community& community, const std::filesystem::path& path);

/// Orders ids like "agent-2" before "agent-10".
bool natural_less(std::string_view a, std::string_view b);

std::string_view to_string(AgentKind kind);

}  // namespace sofa
