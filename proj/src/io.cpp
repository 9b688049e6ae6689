#include "sofa/io.hpp"

#include <fcntl.h>
#include <unistd.h>

#include <algorithm>
#include <array>
#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <ctime>
#include <fstream>
#include <numeric>
#include <sstream>

#include <openssl/evp.h>

#include "sofa/error.hpp"

namespace sofa {

using nlohmann::json;
namespace fs = std::filesystem;

// ---------------------------------------------------------------------------
// Config reading

namespace {

class ConfigReader {
 public:
  std::vector<ConfigIssue> issues;

  void issue(std::string path, std::string message) { issues.push_back({std::move(path), std::move(message)}); }

  bool object(const json& j, const std::string& path) {
    if (j.is_object()) return true;
    issue(path, "expected an object");
    return false;
  }

  void allow_keys(const json& obj, const std::string& path, std::initializer_list<std::string_view> allowed) {
    for (const auto& [key, value] : obj.items()) {
      if (std::find(allowed.begin(), allowed.end(), key) == allowed.end()) issue(path + "/" + key, "unknown key");
    }
  }

  void number(const json& obj, const char* key, const std::string& path, double& out) {
    if (!obj.contains(key)) return;
    const auto& v = obj.at(key);
    if (v.is_number()) {
      out = v.get<double>();
    } else {
      issue(path + "/" + key, "expected a number");
    }
  }

  void integer(const json& obj, const char* key, const std::string& path, int& out) {
    if (!obj.contains(key)) return;
    const auto& v = obj.at(key);
    if (v.is_number_integer()) {
      out = v.get<int>();
    } else {
      issue(path + "/" + key, "expected an integer");
    }
  }

  template <typename Unsigned>
  void count(const json& obj, const char* key, const std::string& path, Unsigned& out) {
    if (!obj.contains(key)) return;
    const auto& v = obj.at(key);
    if (v.is_number_unsigned()) {
      out = v.get<Unsigned>();
    } else {
      issue(path + "/" + key, "expected a nonnegative integer");
    }
  }

  void boolean(const json& obj, const char* key, const std::string& path, bool& out) {
    if (!obj.contains(key)) return;
    const auto& v = obj.at(key);
    if (v.is_boolean()) {
      out = v.get<bool>();
    } else {
      issue(path + "/" + key, "expected true or false");
    }
  }

  void string(const json& obj, const char* key, const std::string& path, std::string& out) {
    if (!obj.contains(key)) return;
    const auto& v = obj.at(key);
    if (v.is_string()) {
      out = v.get<std::string>();
    } else {
      issue(path + "/" + key, "expected a string");
    }
  }

  void number_map(const json& obj, const char* key, const std::string& path, std::map<std::string, double>& out) {
    if (!obj.contains(key)) return;
    const auto& v = obj.at(key);
    const std::string here = path + "/" + key;
    if (!object(v, here)) return;
    out.clear();
    for (const auto& [k, x] : v.items()) {
      if (x.is_number()) {
        out[k] = x.get<double>();
      } else {
        issue(here + "/" + k, "expected a number");
      }
    }
  }

  void string_list(const json& obj, const char* key, const std::string& path, std::vector<std::string>& out) {
    if (!obj.contains(key)) return;
    const auto& v = obj.at(key);
    const std::string here = path + "/" + key;
    if (!v.is_array()) {
      issue(here, "expected an array of strings");
      return;
    }
    out.clear();
    for (std::size_t i = 0; i < v.size(); ++i) {
      if (v[i].is_string()) {
        out.push_back(v[i].get<std::string>());
      } else {
        issue(here + "/" + std::to_string(i), "expected a string");
      }
    }
  }

  void year_range(const json& obj, const char* key, const std::string& path, int& first, int& last) {
    if (!obj.contains(key)) return;
    const auto& v = obj.at(key);
    if (v.is_array() && v.size() == 2 && v[0].is_number_integer() && v[1].is_number_integer()) {
      first = v[0].get<int>();
      last = v[1].get<int>();
    } else {
      issue(path + "/" + key, "expected [first_year, last_year]");
    }
  }

  void prefixed(const std::string& prefix, const std::vector<ConfigIssue>& inner) {
    for (const auto& i : inner) issue(prefix + i.path, i.message);
  }

  // -------------------------------------------------------------------------

  CommunitySpec community_spec(const json& j, const std::string& path) {
    CommunitySpec s;
    if (!object(j, path)) return s;
    allow_keys(j, path,
               {"n_agents", "n_affiliations", "n_domains", "group_tag_proportions", "coauthor_mean_degree",
                "intra_domain_share", "merit", "birth_years", "coauthor_years"});
    count(j, "n_agents", path, s.n_agents);
    count(j, "n_affiliations", path, s.n_affiliations);
    count(j, "n_domains", path, s.n_domains);
    number(j, "coauthor_mean_degree", path, s.coauthor_mean_degree);
    number(j, "intra_domain_share", path, s.intra_domain_share);
    if (j.contains("merit") && object(j.at("merit"), path + "/merit")) {
      allow_keys(j.at("merit"), path + "/merit", {"mu", "sigma"});
      number(j.at("merit"), "mu", path + "/merit", s.merit_log_mean);
      number(j.at("merit"), "sigma", path + "/merit", s.merit_log_sd);
    }
    year_range(j, "birth_years", path, s.first_birth_year, s.last_birth_year);
    year_range(j, "coauthor_years", path, s.first_coauthor_year, s.last_coauthor_year);
    if (j.contains("group_tag_proportions") && object(j.at("group_tag_proportions"), path + "/group_tag_proportions")) {
      for (const auto& [family, labels] : j.at("group_tag_proportions").items()) {
        number_map(j.at("group_tag_proportions"), family.c_str(), path + "/group_tag_proportions",
                   s.group_tag_proportions[family]);
      }
    }
    try {
      s.validate();
    } catch (const ConfigError& e) {
      prefixed(path, e.issues());
    }
    return s;
  }

  Strategy strategy(const json& j, const std::string& path, int evaluation_year) {
    Strategy s;
    if (!object(j, path)) return s;
    allow_keys(j, path, {"kind", "out_degree", "alpha", "predicate", "members", "internal_share", "plan"});
    std::string kind = std::string(to_string(s.kind));
    string(j, "kind", path, kind);
    if (auto k = strategy_kind_from_string(kind)) {
      s.kind = *k;
    } else {
      issue(path + "/kind", "unknown strategy '" + kind + "'");
    }
    count(j, "out_degree", path, s.out_degree);
    if (s.out_degree < 1) issue(path + "/out_degree", "must be >= 1");
    number(j, "alpha", path, s.alpha);
    if (!std::isfinite(s.alpha)) issue(path + "/alpha", "must be finite");
    string(j, "predicate", path, s.predicate);
    string_list(j, "members", path, s.members);
    number(j, "internal_share", path, s.internal_share);
    if (!(s.internal_share >= 0.0 && s.internal_share <= 1.0)) issue(path + "/internal_share", "must be in [0,1]");
    if (j.contains("plan") && object(j.at("plan"), path + "/plan")) {
      for (const auto& [donor, row] : j.at("plan").items()) {
        number_map(j.at("plan"), donor.c_str(), path + "/plan", s.plan[donor]);
      }
    }
    if (s.kind == StrategyKind::predicate) {
      try {
        (void)Predicate::parse(s.predicate, evaluation_year);
      } catch (const ConfigError& e) {
        issue(path + "/predicate", e.issues().front().message);
      }
    }
    if (s.kind == StrategyKind::cartel && s.members.size() < 2) issue(path + "/members", "a cartel needs >= 2 members");
    return s;
  }

  PolicyConfig policy(const json& j, const std::string& path) {
    PolicyConfig p;
    if (!object(j, path)) return p;
    allow_keys(j, path,
               {"total_budget", "default_fraction", "fraction_overrides", "group_multipliers", "public_fraction",
                "public_pref", "tolerance", "max_iter", "evaluation_year", "coi", "cartel", "penalty_policy",
                "domain_budgets", "excluded_domains"});
    number(j, "total_budget", path, p.total_budget);
    number(j, "default_fraction", path, p.default_fraction);
    if (j.contains("fraction_overrides")) {
      const auto& v = j.at("fraction_overrides");
      if (!v.is_array()) {
        issue(path + "/fraction_overrides", "expected an array of {tag, fraction}");
      } else {
        for (std::size_t i = 0; i < v.size(); ++i) {
          const std::string here = path + "/fraction_overrides/" + std::to_string(i);
          if (!object(v[i], here)) continue;
          allow_keys(v[i], here, {"tag", "fraction"});
          FractionOverride o;
          string(v[i], "tag", here, o.tag);
          if (o.tag.empty()) issue(here + "/tag", "required");
          number(v[i], "fraction", here, o.fraction);
          p.fraction_overrides.push_back(o);
        }
      }
    }
    number_map(j, "group_multipliers", path, p.group_multipliers);
    number(j, "public_fraction", path, p.public_fraction);
    if (j.contains("public_pref")) {
      const auto& v = j.at("public_pref");
      if (v.is_string() && v.get<std::string>() == "uniform") {
        p.public_pref.clear();
      } else if (v.is_object()) {
        number_map(j, "public_pref", path, p.public_pref);
      } else {
        issue(path + "/public_pref", "expected \"uniform\" or an {agent_id: weight} object");
      }
    }
    number(j, "tolerance", path, p.tolerance);
    count(j, "max_iter", path, p.max_iter);
    integer(j, "evaluation_year", path, p.evaluation_year);
    if (j.contains("coi") && object(j.at("coi"), path + "/coi")) {
      const auto& c = j.at("coi");
      allow_keys(c, path + "/coi", {"coauthor_window_years", "shared_affiliation", "fallback_uniform_domain"});
      integer(c, "coauthor_window_years", path + "/coi", p.coi.coauthor_window_years);
      boolean(c, "shared_affiliation", path + "/coi", p.coi.shared_affiliation);
      boolean(c, "fallback_uniform_domain", path + "/coi", p.coi.fallback_uniform_domain);
    }
    if (j.contains("cartel") && object(j.at("cartel"), path + "/cartel")) {
      const auto& c = j.at("cartel");
      allow_keys(c, path + "/cartel", {"pair_reciprocity", "internal_share", "max_group_size", "min_rounds"});
      number(c, "pair_reciprocity", path + "/cartel", p.cartel.pair_reciprocity);
      number(c, "internal_share", path + "/cartel", p.cartel.internal_share);
      count(c, "max_group_size", path + "/cartel", p.cartel.max_group_size);
      count(c, "min_rounds", path + "/cartel", p.cartel.min_rounds);
    }
    std::string penalty = std::string(to_string(p.penalty));
    string(j, "penalty_policy", path, penalty);
    if (penalty == "none") {
      p.penalty = PenaltyPolicy::none;
    } else if (penalty == "void_and_redistribute") {
      p.penalty = PenaltyPolicy::void_and_redistribute;
    } else if (penalty == "zero_internal_weights") {
      p.penalty = PenaltyPolicy::zero_internal_weights;
    } else {
      issue(path + "/penalty_policy", "unknown penalty policy '" + penalty + "'");
    }
    number_map(j, "domain_budgets", path, p.domain_budgets);
    std::vector<std::string> excluded;
    string_list(j, "excluded_domains", path, excluded);
    p.excluded_domains = {excluded.begin(), excluded.end()};
    prefixed(path, p.issues());
    return p;
  }
};

json strategy_to_json(const Strategy& s) {
  json plan = json::object();
  for (const auto& [donor, row] : s.plan) plan[donor] = row;
  return {{"kind", std::string(to_string(s.kind))},
          {"out_degree", s.out_degree},
          {"alpha", s.alpha},
          {"predicate", s.predicate},
          {"members", s.members},
          {"internal_share", s.internal_share},
          {"plan", plan}};
}

json policy_to_json(const PolicyConfig& p) {
  json overrides = json::array();
  for (const auto& o : p.fraction_overrides) overrides.push_back({{"tag", o.tag}, {"fraction", o.fraction}});
  return {{"total_budget", p.total_budget},
          {"default_fraction", p.default_fraction},
          {"fraction_overrides", overrides},
          {"group_multipliers", json(p.group_multipliers)},
          {"public_fraction", p.public_fraction},
          {"public_pref", p.public_pref.empty() ? json("uniform") : json(p.public_pref)},
          {"tolerance", p.tolerance},
          {"max_iter", p.max_iter},
          {"evaluation_year", p.evaluation_year},
          {"coi",
           {{"coauthor_window_years", p.coi.coauthor_window_years},
            {"shared_affiliation", p.coi.shared_affiliation},
            {"fallback_uniform_domain", p.coi.fallback_uniform_domain}}},
          {"cartel",
           {{"pair_reciprocity", p.cartel.pair_reciprocity},
            {"internal_share", p.cartel.internal_share},
            {"max_group_size", p.cartel.max_group_size},
            {"min_rounds", p.cartel.min_rounds}}},
          {"penalty_policy", std::string(to_string(p.penalty))},
          {"domain_budgets", json(p.domain_budgets)},
          {"excluded_domains", json(p.excluded_domains)}};
}

}  // namespace

CommunitySpec community_spec_from_json(const json& doc) {
  ConfigReader r;
  auto spec = r.community_spec(doc, "");
  if (!r.issues.empty()) throw ConfigError(std::move(r.issues));
  return spec;
}

json community_spec_to_json(const CommunitySpec& s) {
  json tags = json::object();
  for (const auto& [family, labels] : s.group_tag_proportions) tags[family] = labels;
  return {{"n_agents", s.n_agents},
          {"n_affiliations", s.n_affiliations},
          {"n_domains", s.n_domains},
          {"group_tag_proportions", tags},
          {"coauthor_mean_degree", s.coauthor_mean_degree},
          {"intra_domain_share", s.intra_domain_share},
          {"merit", {{"mu", s.merit_log_mean}, {"sigma", s.merit_log_sd}}},
          {"birth_years", {s.first_birth_year, s.last_birth_year}},
          {"coauthor_years", {s.first_coauthor_year, s.last_coauthor_year}}};
}

ScenarioConfig config_from_json(const json& doc, const fs::path& base_dir) {
  if (!doc.is_object()) throw ConfigError("", "config must be a JSON object");
  ConfigReader r;
  ScenarioConfig c;
  r.allow_keys(doc, "",
               {"schema_version", "seed", "rounds", "mode", "community", "super_nodes", "policy", "strategy",
                "output_dir"});
  r.integer(doc, "schema_version", "", c.schema_version);
  if (c.schema_version != kConfigSchemaVersion) {
    r.issue("/schema_version", "unsupported version " + std::to_string(c.schema_version));
  }
  r.count(doc, "seed", "", c.seed);
  r.count(doc, "rounds", "", c.rounds);
  if (c.rounds < 1) r.issue("/rounds", "must be >= 1");
  std::string mode = std::string(to_string(c.mode));
  r.string(doc, "mode", "", mode);
  if (auto m = run_mode_from_string(mode)) {
    c.mode = *m;
  } else {
    r.issue("/mode", "unknown mode '" + mode + "'");
  }

  if (doc.contains("community") && r.object(doc.at("community"), "/community")) {
    const auto& com = doc.at("community");
    r.allow_keys(com, "/community", {"generate", "file"});
    if (com.contains("generate") && com.contains("file")) {
      r.issue("/community", "give either 'generate' or 'file', not both");
    }
    if (com.contains("file")) {
      std::string file;
      r.string(com, "file", "/community", file);
      fs::path p = file;
      if (p.is_relative() && !base_dir.empty()) p = base_dir / p;
      if (!file.empty() && !fs::exists(p)) r.issue("/community/file", "file not found: " + p.string());
      c.community_file = p.lexically_normal();
      c.generate.reset();
    } else if (com.contains("generate")) {
      c.generate = r.community_spec(com.at("generate"), "/community/generate");
    }
  }

  if (doc.contains("super_nodes")) {
    const auto& v = doc.at("super_nodes");
    if (!v.is_array()) {
      r.issue("/super_nodes", "expected an array of {id, domain_id}");
    } else {
      for (std::size_t i = 0; i < v.size(); ++i) {
        const std::string here = "/super_nodes/" + std::to_string(i);
        if (!r.object(v[i], here)) continue;
        r.allow_keys(v[i], here, {"id", "domain_id"});
        SuperNodeSpec node;
        r.string(v[i], "id", here, node.id);
        r.string(v[i], "domain_id", here, node.domain_id);
        if (node.id.empty()) r.issue(here + "/id", "required");
        if (node.domain_id.empty()) r.issue(here + "/domain_id", "required");
        c.super_nodes.push_back(node);
      }
    }
  }

  if (doc.contains("policy")) c.policy = r.policy(doc.at("policy"), "/policy");

  if (doc.contains("strategy") && r.object(doc.at("strategy"), "/strategy")) {
    const auto& s = doc.at("strategy");
    const int year = c.policy.evaluation_year;
    r.allow_keys(s, "/strategy", {"default", "by_tag", "cartels", "revision"});
    if (s.contains("default")) c.strategy.default_strategy = r.strategy(s.at("default"), "/strategy/default", year);
    if (c.strategy.default_strategy.kind == StrategyKind::identity) {
      r.issue("/strategy/default/kind", "'identity' is only valid as a revision strategy");
    }
    if (s.contains("by_tag")) {
      const auto& v = s.at("by_tag");
      if (!v.is_array()) {
        r.issue("/strategy/by_tag", "expected an array of {tag, strategy}");
      } else {
        for (std::size_t i = 0; i < v.size(); ++i) {
          const std::string here = "/strategy/by_tag/" + std::to_string(i);
          if (!r.object(v[i], here)) continue;
          r.allow_keys(v[i], here, {"tag", "strategy"});
          std::string tag;
          r.string(v[i], "tag", here, tag);
          if (tag.empty()) r.issue(here + "/tag", "required");
          Strategy st = v[i].contains("strategy") ? r.strategy(v[i].at("strategy"), here + "/strategy", year) : Strategy{};
          c.strategy.by_tag.emplace_back(tag, st);
        }
      }
    }
    if (s.contains("cartels")) {
      const auto& v = s.at("cartels");
      if (!v.is_array()) {
        r.issue("/strategy/cartels", "expected an array");
      } else {
        for (std::size_t i = 0; i < v.size(); ++i) {
          Strategy st = r.strategy(v[i], "/strategy/cartels/" + std::to_string(i), year);
          st.kind = StrategyKind::cartel;
          if (st.members.size() < 2) r.issue("/strategy/cartels/" + std::to_string(i) + "/members", "a cartel needs >= 2 members");
          c.strategy.cartels.push_back(st);
        }
      }
    }
    if (s.contains("revision")) c.strategy.revision = r.strategy(s.at("revision"), "/strategy/revision", year);
  }

  std::string out_dir = c.output_dir.string();
  r.string(doc, "output_dir", "", out_dir);
  c.output_dir = out_dir;

  if (!r.issues.empty()) throw ConfigError(std::move(r.issues));
  return c;
}

ScenarioConfig parse_and_validate_config(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("", "cannot open config file " + path.string());
  json doc;
  try {
    in >> doc;
  } catch (const json::exception& e) {
    throw ConfigError("", path.string() + ": " + e.what());
  }
  return config_from_json(doc, path.parent_path());
}

json config_to_json(const ScenarioConfig& c) {
  json community;
  if (c.community_file) {
    community["file"] = c.community_file->string();
  } else if (c.generate) {
    community["generate"] = community_spec_to_json(*c.generate);
  }
  json super_nodes = json::array();
  for (const auto& n : c.super_nodes) super_nodes.push_back({{"id", n.id}, {"domain_id", n.domain_id}});
  json by_tag = json::array();
  for (const auto& [tag, s] : c.strategy.by_tag) by_tag.push_back({{"tag", tag}, {"strategy", strategy_to_json(s)}});
  json cartels = json::array();
  for (const auto& s : c.strategy.cartels) cartels.push_back(strategy_to_json(s));
  return {{"schema_version", c.schema_version},
          {"seed", c.seed},
          {"rounds", c.rounds},
          {"mode", std::string(to_string(c.mode))},
          {"community", community},
          {"super_nodes", super_nodes},
          {"policy", policy_to_json(c.policy)},
          {"strategy",
           {{"default", strategy_to_json(c.strategy.default_strategy)},
            {"by_tag", by_tag},
            {"cartels", cartels},
            {"revision", strategy_to_json(c.strategy.revision)}}},
          {"output_dir", c.output_dir.string()}};
}

std::string config_hash(const ScenarioConfig& config) { return sha256_hex(config_to_json(config).dump()); }

// ---------------------------------------------------------------------------
// Formatting

std::string format_fixed(double value) {
  std::array<char, 64> buf{};
  auto [end, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), value, std::chars_format::fixed, 9);
  if (ec != std::errc()) throw IoError("cannot format value");
  std::string out(buf.data(), end);
  if (out == "-0.000000000") out.erase(0, 1);
  return out;
}

std::string sha256_hex(std::string_view bytes) {
  std::array<unsigned char, EVP_MAX_MD_SIZE> digest{};
  unsigned int length = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), digest.data(), &length, EVP_sha256(), nullptr) != 1) {
    throw IoError("sha256 failed");
  }
  static constexpr char kHex[] = "0123456789abcdef";
  std::string out;
  out.reserve(2 * length);
  for (unsigned int i = 0; i < length; ++i) {
    out += kHex[digest[i] >> 4];
    out += kHex[digest[i] & 0xF];
  }
  return out;
}

namespace {

std::vector<std::size_t> id_order(const Community& community) {
  std::vector<std::size_t> order(community.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return natural_less(community.agent(a).id, community.agent(b).id);
  });
  return order;
}

std::string percent_key(double p) {
  if (p == std::floor(p)) return std::to_string(static_cast<long long>(p));
  return format_fixed(p);
}

json transfer_json(const Transfer& t, const Community& community) {
  return {{"round", t.round},
          {"donor_id", community.agent(t.donor).id},
          {"recipient_id", community.agent(t.recipient).id},
          {"amount", t.amount}};
}

}  // namespace

std::string funding_csv(const ScenarioResult& result) {
  const auto order = id_order(result.community);
  std::string out = "round,agent_id,incoming_total,retained,donated\n";
  for (const auto& state : result.history) {
    const std::string round = std::to_string(state.round_index);
    for (std::size_t i : order) {
      const auto k = static_cast<Eigen::Index>(i);
      out += round;
      out += ',';
      out += result.community.agent(i).id;
      out += ',';
      out += format_fixed(state.incoming_total[k]);
      out += ',';
      out += format_fixed(state.retained[k]);
      out += ',';
      out += format_fixed(state.donated_pool[k]);
      out += '\n';
    }
  }
  return out;
}

std::string transfers_csv(const DonationLedger& ledger, const Community& community) {
  const auto order = id_order(community);
  std::vector<std::size_t> rank(community.size());
  for (std::size_t r = 0; r < order.size(); ++r) rank[order[r]] = r;
  std::vector<Transfer> rows = ledger.records();
  std::sort(rows.begin(), rows.end(), [&](const Transfer& a, const Transfer& b) {
    return std::tuple(a.round, rank[a.donor], rank[a.recipient]) < std::tuple(b.round, rank[b.donor], rank[b.recipient]);
  });
  std::string out = "round,donor_id,recipient_id,amount\n";
  for (const auto& t : rows) {
    out += std::to_string(t.round);
    out += ',';
    out += community.agent(t.donor).id;
    out += ',';
    out += community.agent(t.recipient).id;
    out += ',';
    out += format_fixed(t.amount);
    out += '\n';
  }
  return out;
}

json metrics_to_json(const MetricsReport& m, const Community& community) {
  json lorenz = json::array();
  for (const auto& [p, s] : m.lorenz) lorenz.push_back({p, s});
  json top = json::object();
  for (const auto& [p, s] : m.top_shares) top[percent_key(p)] = s;
  json baseline = json::array();
  if (m.baseline_equal_split.size() == static_cast<Eigen::Index>(community.size())) {
    for (std::size_t i : id_order(community)) baseline.push_back(m.baseline_equal_split[static_cast<Eigen::Index>(i)]);
  }
  return {{"gini", m.gini},
          {"lorenz", lorenz},
          {"top_shares", top},
          {"per_group_shares", json(m.per_group_shares)},
          {"convergence", {{"iterations", m.iterations}, {"final_residual", m.final_residual}}},
          {"total_retained", m.total_retained},
          {"baseline_equal_split", baseline}};
}

json integrity_to_json(const IntegrityReport& report, const Community& community) {
  json conflicted = json::array();
  for (const auto& c : report.conflicted_transfers) {
    json j = transfer_json(c.transfer, community);
    json reasons = json::array();
    if (c.reasons & kCoauthor) reasons.push_back("coauthor");
    if (c.reasons & kSharedAffiliation) reasons.push_back("shared_affiliation");
    j["reasons"] = reasons;
    conflicted.push_back(std::move(j));
  }
  json flags = json::array();
  for (const auto& f : report.cartel_flags) {
    json members = json::array();
    for (auto i : f.members) members.push_back(community.agent(i).id);
    json evidence = json::array();
    for (const auto& t : f.evidence) evidence.push_back(transfer_json(t, community));
    flags.push_back({{"kind", std::string(to_string(f.kind))},
                     {"members", members},
                     {"score", f.score},
                     {"rounds_observed", f.rounds_observed},
                     {"first_round", f.first_round},
                     {"evidence", evidence}});
  }
  return {{"conflicted_transfers", conflicted},
          {"cartel_flags", flags},
          {"totals",
           {{"transfers", report.transfer_count},
            {"rounds_covered", report.rounds_covered},
            {"total_amount", report.total_amount},
            {"conflicted_count", report.conflicted_transfers.size()},
            {"conflicted_amount", report.conflicted_amount},
            {"cartel_flag_count", report.cartel_flags.size()},
            {"cartel_history_sufficient", report.cartel_history_sufficient}}}};
}

json cost_report_to_json(const CostReport& r) {
  return {{"n_applications", r.n_applications},
          {"cost_per_application", r.cost_per_application},
          {"total_application_cost", r.total_application_cost},
          {"baseline_grant", r.baseline_grant},
          {"overhead_ratio", r.overhead_ratio},
          {"application_exceeds_grant", r.application_exceeds_grant}};
}

CostParams cost_params_from_json(const json& doc) {
  ConfigReader r;
  CostParams p;
  if (r.object(doc, "")) {
    r.allow_keys(doc, "", {"n_applications", "cost_per_application", "funds_distributed", "time_cost_unsuccessful",
                           "baseline_grant", "currency", "note"});
    r.number(doc, "n_applications", "", p.n_applications);
    r.number(doc, "cost_per_application", "", p.cost_per_application);
    r.number(doc, "funds_distributed", "", p.funds_distributed);
    r.number(doc, "time_cost_unsuccessful", "", p.time_cost_unsuccessful);
    r.number(doc, "baseline_grant", "", p.baseline_grant);
  }
  if (!r.issues.empty()) throw ConfigError(std::move(r.issues));
  return p;
}

// ---------------------------------------------------------------------------
// Files

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

void write_file(const fs::path& path, std::string_view bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("write failed: " + path.string());
}

DirectoryLock::DirectoryLock(const fs::path& dir) : path_(dir / ".sofa.lock") {
  const int fd = ::open(path_.c_str(), O_CREAT | O_EXCL | O_WRONLY, 0644);
  if (fd < 0) throw IoError("output directory " + dir.string() + " is locked by another run (" + path_.string() + ")");
  ::close(fd);
}

DirectoryLock::~DirectoryLock() {
  std::error_code ec;
  fs::remove(path_, ec);
}

std::string timestamp_now() {
  std::time_t seconds = 0;
  if (const char* epoch = std::getenv("SOURCE_DATE_EPOCH"); epoch && *epoch) {
    seconds = static_cast<std::time_t>(std::strtoll(epoch, nullptr, 10));
  } else {
    seconds = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  }
  std::tm utc{};
  gmtime_r(&seconds, &utc);
  std::array<char, 32> buf{};
  std::strftime(buf.data(), buf.size(), "%Y-%m-%dT%H:%M:%SZ", &utc);
  return buf.data();
}

json manifest_to_json(const RunManifest& m, const ScenarioConfig& config) {
  json outputs = json::array();
  for (const auto& f : m.outputs) outputs.push_back({{"file", f.name}, {"sha256", f.sha256}, {"bytes", f.bytes}});
  return {{"config_hash", m.config_hash},
          {"seed", m.seed},
          {"tool_version", m.tool_version},
          {"started_at", m.started_at},
          {"finished_at", m.finished_at},
          {"outputs", outputs},
          {"config", config_to_json(config)}};
}

RunManifest write_outputs(const ScenarioResult& result, const fs::path& out_dir, std::string started_at) {
  std::error_code ec;
  fs::create_directories(out_dir, ec);
  if (ec) throw IoError("cannot create " + out_dir.string() + ": " + ec.message());
  const DirectoryLock lock(out_dir);

  RunManifest manifest;
  manifest.config_hash = config_hash(result.config);
  manifest.seed = result.config.seed;
  manifest.tool_version = std::string(kToolVersion);
  manifest.started_at = started_at.empty() ? timestamp_now() : std::move(started_at);

  const std::array<std::pair<std::string, std::string>, 4> files{{
      {"funding_per_round.csv", funding_csv(result)},
      {"transfers.csv", transfers_csv(result.ledger, result.community)},
      {"metrics.json", [&] {
         json m = metrics_to_json(result.metrics, result.community);
         m["scenario"] = {{"mode", std::string(to_string(result.config.mode))},
                          {"rounds_completed", result.history.size()},
                          {"failed", result.failed},
                          {"failure", result.failure}};
         return m.dump(2) + "\n";
       }()},
      {"integrity_report.json", integrity_to_json(result.integrity, result.community).dump(2) + "\n"},
  }};
  for (const auto& [name, bytes] : files) {
    write_file(out_dir / name, bytes);
    manifest.outputs.push_back({name, sha256_hex(bytes), bytes.size()});
  }
  manifest.finished_at = timestamp_now();
  write_file(out_dir / "manifest.json", manifest_to_json(manifest, result.config).dump(2) + "\n");
  return manifest;
}

std::vector<std::string> verify_manifest(const fs::path& out_dir) {
  json manifest;
  try {
    manifest = json::parse(read_file(out_dir / "manifest.json"));
  } catch (const json::exception& e) {
    throw FormatError("manifest.json: " + std::string(e.what()));
  }
  std::vector<std::string> mismatched;
  for (const auto& entry : manifest.at("outputs")) {
    const auto name = entry.at("file").get<std::string>();
    const fs::path p = out_dir / name;
    if (!fs::exists(p) || sha256_hex(read_file(p)) != entry.at("sha256").get<std::string>()) mismatched.push_back(name);
  }
  return mismatched;
}

// ---------------------------------------------------------------------------
// CSV readers

namespace {

std::vector<std::string_view> split(std::string_view line, char sep) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  for (;;) {
    const auto pos = line.find(sep, start);
    out.push_back(line.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

template <typename T>
T parse_field(std::string_view text, const std::string& where) {
  T value{};
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc() || ptr != text.data() + text.size()) {
    throw FormatError(where + ": cannot parse '" + std::string(text) + "'");
  }
  return value;
}

std::vector<std::string> csv_lines(const fs::path& path, std::string_view header) {
  const std::string text = read_file(path);
  std::vector<std::string> lines;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (!line.empty()) lines.push_back(line);
  }
  if (lines.empty() || lines.front() != header) {
    throw FormatError(path.string() + ": expected header '" + std::string(header) + "'");
  }
  lines.erase(lines.begin());
  return lines;
}

}  // namespace

DonationLedger read_transfers_csv(const fs::path& path, const Community& community) {
  DonationLedger ledger;
  const auto lines = csv_lines(path, "round,donor_id,recipient_id,amount");
  std::vector<std::string> unknown;
  for (std::size_t n = 0; n < lines.size(); ++n) {
    const std::string where = path.string() + ":" + std::to_string(n + 2);
    const auto fields = split(lines[n], ',');
    if (fields.size() != 4) throw FormatError(where + ": expected 4 fields");
    const auto donor = community.index_of(fields[1]);
    const auto recipient = community.index_of(fields[2]);
    if (!donor) unknown.emplace_back(fields[1]);
    if (!recipient) unknown.emplace_back(fields[2]);
    if (!donor || !recipient) continue;
    const double amount = parse_field<double>(fields[3], where);
    if (!(amount > 0.0)) throw ValidationError(where + ": transfer amounts must be positive");
    ledger.add({parse_field<std::size_t>(fields[0], where), *donor, *recipient, amount});
  }
  if (!unknown.empty()) {
    std::sort(unknown.begin(), unknown.end());
    unknown.erase(std::unique(unknown.begin(), unknown.end()), unknown.end());
    throw ValidationError("transfers reference agents missing from the community", unknown);
  }
  return ledger;
}

std::vector<FundingRow> read_funding_csv(const fs::path& path) {
  std::vector<FundingRow> rows;
  const auto lines = csv_lines(path, "round,agent_id,incoming_total,retained,donated");
  for (std::size_t n = 0; n < lines.size(); ++n) {
    const std::string where = path.string() + ":" + std::to_string(n + 2);
    const auto fields = split(lines[n], ',');
    if (fields.size() != 5) throw FormatError(where + ": expected 5 fields");
    rows.push_back({parse_field<std::size_t>(fields[0], where), std::string(fields[1]),
                    parse_field<double>(fields[2], where), parse_field<double>(fields[3], where),
                    parse_field<double>(fields[4], where)});
  }
  return rows;
}

}  // namespace sofa
