#pragma once

#include <iostream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "settings.hpp"

namespace wozlab::cli {

inline constexpr const char* kToolVersion = "0.1.0";

struct DispatchContext {
  std::ostream* out = &std::cout;
  std::ostream* err = &std::cerr;
  EnvLookup env;  // defaults to the process environment
};

struct DispatchResult {
  int exit_code = 0;
  nlohmann::json manifest;  // null when no command ran
};

/// Runs one command. `args` excludes the program name. Exit 0 on success,
/// 2 on a usage error, 1 on a pipeline failure (with an error record on
/// the error stream and in the manifest).
DispatchResult dispatch(const std::vector<std::string>& args, const DispatchContext& ctx = {});

}  // namespace wozlab::cli
