#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace sofa {

/// Base of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// One configuration problem, located by a JSON-pointer style path.
struct ConfigIssue {
  std::string path;
  std::string message;
};

/// Invalid configuration. Collects every issue found in one pass.
class ConfigError : public Error {
 public:
  explicit ConfigError(std::vector<ConfigIssue> issues);
  ConfigError(std::string path, std::string message);

  const std::vector<ConfigIssue>& issues() const noexcept { return issues_; }

 private:
  std::vector<ConfigIssue> issues_;
};

/// Input that cannot be parsed (malformed JSON/CSV).
class FormatError : public Error {
 public:
  using Error::Error;
};

/// Structurally parseable input that violates a type invariant.
class ValidationError : public Error {
 public:
  explicit ValidationError(const std::string& message, std::vector<std::string> offending = {});

  const std::vector<std::string>& offending() const noexcept { return offending_; }

 private:
  std::vector<std::string> offending_;
};

/// A donor row has no eligible recipient left.
class EmptyRowError : public Error {
 public:
  EmptyRowError(std::size_t donor, const std::string& message);

  std::size_t donor() const noexcept { return donor_; }

 private:
  std::size_t donor_;
};

/// A predicate selected nobody.
class EmptyTargetError : public Error {
 public:
  using Error::Error;
};

class InsufficientHistoryError : public Error {
 public:
  using Error::Error;
};

/// Metric evaluated on an input where it is not defined (e.g. zero total).
class UndefinedInputError : public Error {
 public:
  using Error::Error;
};

/// Dense solve requested above the size guard.
class DenseSizeError : public Error {
 public:
  using Error::Error;
};

class DimensionError : public Error {
 public:
  using Error::Error;
};

class ConvergenceError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace sofa
