#include "sofa/error.hpp"

#include <utility>

namespace sofa {

namespace {

std::string join_issues(const std::vector<ConfigIssue>& issues) {
  std::string out = "invalid configuration:";
  for (const auto& issue : issues) {
    out += "\n  ";
    out += issue.path.empty() ? "/" : issue.path;
    out += ": ";
    out += issue.message;
  }
  return out;
}

std::string with_ids(const std::string& message, const std::vector<std::string>& ids) {
  if (ids.empty()) return message;
  std::string out = message + " [";
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (i) out += ", ";
    out += ids[i];
  }
  return out + "]";
}

}  // namespace

ConfigError::ConfigError(std::vector<ConfigIssue> issues)
    : Error(join_issues(issues)), issues_(std::move(issues)) {}

ConfigError::ConfigError(std::string path, std::string message)
    : ConfigError(std::vector<ConfigIssue>{{std::move(path), std::move(message)}}) {}

ValidationError::ValidationError(const std::string& message, std::vector<std::string> offending)
    : Error(with_ids(message, offending)), offending_(std::move(offending)) {}

EmptyRowError::EmptyRowError(std::size_t donor, const std::string& message)
    : Error(message), donor_(donor) {}

}  // namespace sofa
