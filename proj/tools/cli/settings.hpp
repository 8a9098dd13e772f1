#pragma once

#include <filesystem>
#include <functional>
#include <optional>
#include <stdexcept>
#include <string>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

namespace wozlab::cli {

/// Bad invocation: unknown flags, missing inputs. Exit status 2.
struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

using EnvLookup = std::function<std::optional<std::string>(const std::string&)>;

/// Resolves each setting from, in order: the command-line flag, the
/// WOZLAB_<KEY> environment variable, the config file (a section named
/// after the command first, then top level), the built-in default.
/// Every resolved value is recorded with its source.
class Settings {
 public:
  Settings(const CLI::App& command, nlohmann::json file, EnvLookup env);

  static nlohmann::json load_file(const std::filesystem::path& path);
  static std::string env_name(const std::string& key);

  std::string str(const std::string& key, const std::string& def = {});
  std::optional<std::string> maybe_str(const std::string& key);
  long long integer(const std::string& key, long long def);
  std::uint64_t unsigned_integer(const std::string& key, std::uint64_t def);
  double number(const std::string& key, double def);
  std::optional<double> maybe_number(const std::string& key);
  bool flag(const std::string& key, bool def = false);
  /// Throws UsageError naming the flag when the key resolves nowhere.
  std::string required(const std::string& key);

  const nlohmann::json& resolved() const { return resolved_; }

 private:
  struct Raw {
    std::optional<std::string> text;  // flag or env
    std::optional<nlohmann::json> file;
    std::string source;
  };
  Raw lookup(const std::string& key) const;
  template <class T>
  std::optional<T> typed(const std::string& key);
  void record(const std::string& key, const nlohmann::json& value, const std::string& source);

  const CLI::App& command_;
  nlohmann::json file_;
  EnvLookup env_;
  nlohmann::json resolved_ = nlohmann::json::object();
};

}  // namespace wozlab::cli
