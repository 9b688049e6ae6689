#include "sofa/population.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>
#include <utility>

#include "sofa/error.hpp"
#include "sofa/random.hpp"

namespace sofa {

using nlohmann::json;

bool Agent::has_tag(std::string_view tag) const {
  return group_tags.find(std::string(tag)) != group_tags.end();
}

std::string_view to_string(AgentKind kind) {
  return kind == AgentKind::super_node ? "super_node" : "scientist";
}

bool natural_less(std::string_view a, std::string_view b) {
  std::size_t i = 0, j = 0;
  while (i < a.size() && j < b.size()) {
    const bool da = std::isdigit(static_cast<unsigned char>(a[i])) != 0;
    const bool db = std::isdigit(static_cast<unsigned char>(b[j])) != 0;
    if (da && db) {
      std::size_t ie = i, je = j;
      while (ie < a.size() && std::isdigit(static_cast<unsigned char>(a[ie]))) ++ie;
      while (je < b.size() && std::isdigit(static_cast<unsigned char>(b[je]))) ++je;
      std::string_view na = a.substr(i, ie - i), nb = b.substr(j, je - j);
      while (na.size() > 1 && na.front() == '0') na.remove_prefix(1);
      while (nb.size() > 1 && nb.front() == '0') nb.remove_prefix(1);
      if (na.size() != nb.size()) return na.size() < nb.size();
      if (na != nb) return na < nb;
      i = ie;
      j = je;
    } else {
      if (a[i] != b[j]) return a[i] < b[j];
      ++i;
      ++j;
    }
  }
  if (a.size() - i != b.size() - j) return a.size() - i < b.size() - j;
  return a < b;
}

// ---------------------------------------------------------------------------
// Community

Community::Community(std::vector<Agent> agents, std::vector<CoauthorEdge> edges)
    : agents_(std::move(agents)) {
  std::vector<std::string> duplicates;
  std::vector<std::string> bad;
  for (std::size_t i = 0; i < agents_.size(); ++i) {
    const Agent& a = agents_[i];
    if (a.id.empty()) {
      bad.push_back("#" + std::to_string(i));
      continue;
    }
    if (!index_.emplace(a.id, i).second) duplicates.push_back(a.id);
    if (a.domain_id.empty() || !(a.merit >= 0.0) || !std::isfinite(a.merit)) bad.push_back(a.id);
    if (a.fraction_override && !(*a.fraction_override >= 0.0 && *a.fraction_override < 1.0)) {
      bad.push_back(a.id);
    }
    if (!a.is_super_node()) ++scientist_count_;
  }
  if (!duplicates.empty()) throw ValidationError("duplicate agent ids", duplicates);
  if (!bad.empty()) {
    throw ValidationError("agents need an id and a domain, merit >= 0 and fraction_override in [0,1)",
                          bad);
  }

  std::vector<std::string> dangling;
  for (auto& e : edges) {
    if (e.a >= agents_.size() || e.b >= agents_.size()) {
      dangling.push_back(std::to_string(std::max(e.a, e.b)));
      continue;
    }
    if (e.a == e.b) throw ValidationError("self coauthor edge", {agents_[e.a].id});
    if (e.a > e.b) std::swap(e.a, e.b);
  }
  if (!dangling.empty()) throw ValidationError("coauthor edge references unknown agent index", dangling);

  std::sort(edges.begin(), edges.end(), [](const CoauthorEdge& x, const CoauthorEdge& y) {
    return std::tie(x.a, x.b, x.last_year) < std::tie(y.a, y.b, y.last_year);
  });
  for (const auto& e : edges) {
    if (!edges_.empty() && edges_.back().a == e.a && edges_.back().b == e.b) {
      edges_.back().last_year = e.last_year;  // sorted ascending: keep the latest
    } else {
      edges_.push_back(e);
    }
  }
}

std::optional<std::size_t> Community::index_of(std::string_view id) const {
  auto it = index_.find(std::string(id));
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

std::size_t Community::require_index(std::string_view id) const {
  if (auto i = index_of(id)) return *i;
  throw ValidationError("unknown agent id", {std::string(id)});
}

std::vector<std::string> Community::domains() const {
  std::set<std::string> out;
  for (const auto& a : agents_) out.insert(a.domain_id);
  return {out.begin(), out.end()};
}

std::vector<std::size_t> Community::members_of_domain(std::string_view domain_id) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < agents_.size(); ++i) {
    if (agents_[i].domain_id == domain_id) out.push_back(i);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Generation

void CommunitySpec::validate() const {
  std::vector<ConfigIssue> issues;
  if (n_agents < 2) issues.push_back({"/n_agents", "must be >= 2"});
  if (n_affiliations < 1) issues.push_back({"/n_affiliations", "must be >= 1"});
  if (n_domains < 1) issues.push_back({"/n_domains", "must be >= 1"});
  if (n_agents >= 2 && n_domains > n_agents) issues.push_back({"/n_domains", "must be <= n_agents"});
  if (n_agents >= 2 && n_affiliations > n_agents) {
    issues.push_back({"/n_affiliations", "must be <= n_agents"});
  }
  for (const auto& [family, labels] : group_tag_proportions) {
    double total = 0.0;
    for (const auto& [label, p] : labels) {
      if (!(p >= 0.0 && p <= 1.0)) {
        issues.push_back({"/group_tag_proportions/" + family + "/" + label, "must be in [0,1]"});
      }
      total += p;
    }
    if (total > 1.0 + 1e-12) {
      issues.push_back({"/group_tag_proportions/" + family, "proportions must sum to <= 1"});
    }
  }
  if (!(coauthor_mean_degree >= 0.0) || !std::isfinite(coauthor_mean_degree)) {
    issues.push_back({"/coauthor_mean_degree", "must be >= 0"});
  } else if (n_agents >= 2 && coauthor_mean_degree > static_cast<double>(n_agents - 1)) {
    issues.push_back({"/coauthor_mean_degree", "must be <= n_agents - 1"});
  }
  if (!(intra_domain_share >= 0.0 && intra_domain_share <= 1.0)) {
    issues.push_back({"/intra_domain_share", "must be in [0,1]"});
  }
  if (!(merit_log_sd >= 0.0) || !std::isfinite(merit_log_mean)) {
    issues.push_back({"/merit", "lognormal parameters must be finite with sigma >= 0"});
  }
  if (first_birth_year > last_birth_year) issues.push_back({"/birth_years", "empty range"});
  if (first_coauthor_year > last_coauthor_year) issues.push_back({"/coauthor_years", "empty range"});
  if (!issues.empty()) throw ConfigError(std::move(issues));
}

namespace {

std::vector<std::size_t> balanced_labels(std::size_t n, std::size_t n_labels, std::mt19937_64& rng) {
  std::vector<std::size_t> labels(n);
  for (std::size_t i = 0; i < n; ++i) labels[i] = i % n_labels;
  std::shuffle(labels.begin(), labels.end(), rng);
  return labels;
}

}  // namespace

Community generate_community(const CommunitySpec& spec, std::uint64_t seed) {
  spec.validate();
  const std::size_t n = spec.n_agents;

  auto rng = substream(seed, "community", 0);
  const auto domain_of = balanced_labels(n, spec.n_domains, rng);
  const auto affiliation_of = balanced_labels(n, spec.n_affiliations, rng);

  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::uniform_int_distribution<int> birth(spec.first_birth_year, spec.last_birth_year);
  std::lognormal_distribution<double> merit(spec.merit_log_mean, spec.merit_log_sd);

  std::vector<Agent> agents(n);
  for (std::size_t i = 0; i < n; ++i) {
    Agent& a = agents[i];
    a.id = "agent-" + std::to_string(i + 1);
    a.domain_id = "domain-" + std::to_string(domain_of[i] + 1);
    a.affiliation_ids.insert("aff-" + std::to_string(affiliation_of[i] + 1));
    a.birth_year = birth(rng);
    a.merit = merit(rng);
    for (const auto& [family, labels] : spec.group_tag_proportions) {
      const double u = unit(rng);
      double cumulative = 0.0;
      for (const auto& [label, p] : labels) {
        cumulative += p;
        if (u < cumulative) {
          a.group_tags.insert(label);
          break;
        }
      }
    }
  }

  std::vector<std::vector<std::size_t>> by_domain(spec.n_domains);
  for (std::size_t i = 0; i < n; ++i) by_domain[domain_of[i]].push_back(i);

  const auto target_edges = static_cast<std::size_t>(std::llround(static_cast<double>(n) * spec.coauthor_mean_degree / 2.0));
  std::set<std::pair<std::size_t, std::size_t>> chosen;
  std::vector<CoauthorEdge> edges;
  edges.reserve(target_edges);
  std::uniform_int_distribution<std::size_t> any(0, n - 1);
  std::uniform_int_distribution<int> year(spec.first_coauthor_year, spec.last_coauthor_year);
  const std::size_t max_attempts = 50 * target_edges + 100;
  for (std::size_t attempt = 0; edges.size() < target_edges && attempt < max_attempts; ++attempt) {
    const std::size_t u = any(rng);
    std::size_t v = u;
    const auto& peers = by_domain[domain_of[u]];
    if (unit(rng) < spec.intra_domain_share && peers.size() > 1) {
      v = peers[std::uniform_int_distribution<std::size_t>(0, peers.size() - 1)(rng)];
    } else {
      v = any(rng);
    }
    if (u == v) continue;
    auto key = std::minmax(u, v);
    if (!chosen.insert({key.first, key.second}).second) continue;
    edges.push_back({key.first, key.second, year(rng)});
  }
  return Community(std::move(agents), std::move(edges));
}

// ---------------------------------------------------------------------------
// Serialization

json community_to_json(const Community& community) {
  json agents = json::array();
  for (const auto& a : community.agents()) {
    json j = {{"id", a.id},
              {"kind", std::string(to_string(a.kind))},
              {"group_tags", a.group_tags},
              {"birth_year", a.birth_year},
              {"domain_id", a.domain_id},
              {"affiliation_ids", a.affiliation_ids},
              {"merit", a.merit}};
    if (a.fraction_override) j["fraction_override"] = *a.fraction_override;
    agents.push_back(std::move(j));
  }
  json edges = json::array();
  for (const auto& e : community.coauthor_edges()) {
    edges.push_back(json::array({community.agent(e.a).id, community.agent(e.b).id, e.last_year}));
  }
  return {{"schema_version", kCommunitySchemaVersion}, {"agents", std::move(agents)},
          {"coauthor_edges", std::move(edges)}};
}

Community community_from_json(const json& doc) {
  try {
    if (!doc.is_object()) throw FormatError("community document must be a JSON object");
    const int version = doc.value("schema_version", kCommunitySchemaVersion);
    if (version != kCommunitySchemaVersion) {
      throw FormatError("unsupported community schema_version " + std::to_string(version));
    }
    if (!doc.contains("agents") || !doc.at("agents").is_array()) {
      throw FormatError("community document needs an 'agents' array");
    }
    std::vector<Agent> agents;
    for (const auto& j : doc.at("agents")) {
      Agent a;
      a.id = j.at("id").get<std::string>();
      const auto kind = j.value("kind", std::string("scientist"));
      if (kind == "scientist") {
        a.kind = AgentKind::scientist;
      } else if (kind == "super_node") {
        a.kind = AgentKind::super_node;
      } else {
        throw FormatError("agent '" + a.id + "': unknown kind '" + kind + "'");
      }
      a.group_tags = j.value("group_tags", std::set<std::string>{});
      a.birth_year = j.value("birth_year", 1980);
      a.domain_id = j.at("domain_id").get<std::string>();
      a.affiliation_ids = j.value("affiliation_ids", std::set<std::string>{});
      a.merit = j.value("merit", 0.0);
      if (j.contains("fraction_override") && !j.at("fraction_override").is_null()) {
        a.fraction_override = j.at("fraction_override").get<double>();
      }
      agents.push_back(std::move(a));
    }

    std::unordered_map<std::string, std::size_t> index;
    for (std::size_t i = 0; i < agents.size(); ++i) index.emplace(agents[i].id, i);

    std::vector<CoauthorEdge> edges;
    std::vector<std::string> unknown;
    if (doc.contains("coauthor_edges")) {
      for (const auto& e : doc.at("coauthor_edges")) {
        if (!e.is_array() || e.size() != 3) throw FormatError("coauthor edge must be [id_a, id_b, year]");
        const auto ida = e.at(0).get<std::string>();
        const auto idb = e.at(1).get<std::string>();
        auto ia = index.find(ida);
        auto ib = index.find(idb);
        if (ia == index.end()) unknown.push_back(ida);
        if (ib == index.end()) unknown.push_back(idb);
        if (ia == index.end() || ib == index.end()) continue;
        if (ia->second == ib->second) throw ValidationError("self coauthor edge", {ida});
        edges.push_back({ia->second, ib->second, e.at(2).get<int>()});
      }
    }
    if (!unknown.empty()) throw ValidationError("coauthor edge references unknown agent id", unknown);
    return Community(std::move(agents), std::move(edges));
  } catch (const json::exception& e) {
    throw FormatError(std::string("malformed community document: ") + e.what());
  }
}

Community load_community(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open community file " + path.string());
  json doc;
  try {
    in >> doc;
  } catch (const json::exception& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
  return community_from_json(doc);
}

void save_community(const Community& community, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write community file " + path.string());
  out << community_to_json(community).dump(2) << '\n';
  if (!out) throw IoError("write failed: " + path.string());
}

}  // namespace sofa
