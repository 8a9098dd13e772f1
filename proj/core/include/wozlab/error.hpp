#pragma once

#include <stdexcept>
#include <string>

namespace wozlab {

// Error categories surfaced to callers. The CLI maps these onto exit codes.
enum class ErrorKind {
  Config,
  Validation,
  Transport,
  Throttling,
  Integrity,
  State,
  Conflict,
  UndefinedMetric,
  Analysis,
  NotFound,
};

const char* to_string(ErrorKind kind);

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

struct ConfigError : Error {
  explicit ConfigError(const std::string& w) : Error(ErrorKind::Config, w) {}
};
struct ValidationError : Error {
  explicit ValidationError(const std::string& w) : Error(ErrorKind::Validation, w) {}
};
struct IntegrityError : Error {
  explicit IntegrityError(const std::string& w) : Error(ErrorKind::Integrity, w) {}
};
struct StateError : Error {
  explicit StateError(const std::string& w) : Error(ErrorKind::State, w) {}
};
struct ConflictError : Error {
  explicit ConflictError(const std::string& w) : Error(ErrorKind::Conflict, w) {}
};
struct NotFoundError : Error {
  explicit NotFoundError(const std::string& w) : Error(ErrorKind::NotFound, w) {}
};
/// A metric is mathematically undefined for the given input (empty text,
/// zero-norm vector, degenerate sample).
struct UndefinedMetricError : Error {
  explicit UndefinedMetricError(const std::string& w)
      : Error(ErrorKind::UndefinedMetric, w) {}
};
struct AnalysisError : Error {
  explicit AnalysisError(const std::string& w) : Error(ErrorKind::Analysis, w) {}
};

}  // namespace wozlab
