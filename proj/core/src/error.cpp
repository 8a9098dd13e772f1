#include "wozlab/error.hpp"

namespace wozlab {

const char* to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::Config: return "config";
    case ErrorKind::Validation: return "validation";
    case ErrorKind::Transport: return "transport";
    case ErrorKind::Throttling: return "throttling";
    case ErrorKind::Integrity: return "integrity";
    case ErrorKind::State: return "state";
    case ErrorKind::Conflict: return "conflict";
    case ErrorKind::UndefinedMetric: return "undefined_metric";
    case ErrorKind::Analysis: return "analysis";
    case ErrorKind::NotFound: return "not_found";
  }
  return "unknown";
}

}  // namespace wozlab
