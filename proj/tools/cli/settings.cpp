#include "settings.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <fstream>

namespace wozlab::cli {

namespace {

std::string flag_name(const std::string& key) {
  std::string f = key;
  std::replace(f.begin(), f.end(), '_', '-');
  return "--" + f;
}

template <class T>
T parse_text(const std::string& key, const std::string& text) {
  if constexpr (std::is_same_v<T, std::string>) {
    return text;
  } else if constexpr (std::is_same_v<T, bool>) {
    std::string v = text;
    for (auto& c : v) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    if (v == "1" || v == "true" || v == "yes" || v == "on") return true;
    if (v == "0" || v == "false" || v == "no" || v == "off" || v.empty()) return false;
    throw UsageError(key + ": expected a boolean, got '" + text + "'");
  } else if constexpr (std::is_floating_point_v<T>) {
    try {
      std::size_t used = 0;
      const double d = std::stod(text, &used);
      if (used != text.size()) throw std::invalid_argument(text);
      return d;
    } catch (const std::exception&) {
      throw UsageError(key + ": expected a number, got '" + text + "'");
    }
  } else {
    T v{};
    const auto* end = text.data() + text.size();
    const auto r = std::from_chars(text.data(), end, v);
    if (r.ec != std::errc{} || r.ptr != end)
      throw UsageError(key + ": expected an integer, got '" + text + "'");
    return v;
  }
}

}  // namespace

Settings::Settings(const CLI::App& command, nlohmann::json file, EnvLookup env)
    : command_(command), file_(std::move(file)), env_(std::move(env)) {
  if (!file_.is_object()) file_ = nlohmann::json::object();
}

nlohmann::json Settings::load_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw UsageError("cannot open config file " + path.string());
  try {
    nlohmann::json j;
    in >> j;
    if (!j.is_object()) throw UsageError("config file " + path.string() + " must hold a JSON object");
    return j;
  } catch (const nlohmann::json::exception& e) {
    throw UsageError("config file " + path.string() + ": " + e.what());
  }
}

std::string Settings::env_name(const std::string& key) {
  std::string e = "WOZLAB_";
  for (char c : key) e += c == '-' ? '_' : static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
  return e;
}

Settings::Raw Settings::lookup(const std::string& key) const {
  Raw raw;
  if (const CLI::Option* opt = command_.get_option_no_throw(flag_name(key)); opt && opt->count() > 0) {
    raw.text = opt->get_expected_min() == 0 ? std::string("true") : opt->as<std::string>();
    raw.source = "flag";
    return raw;
  }
  if (env_) {
    if (auto v = env_(env_name(key))) {
      raw.text = *v;
      raw.source = "env";
      return raw;
    }
  }
  const std::string section = command_.get_name();
  for (const nlohmann::json* scope :
       {file_.contains(section) && file_.at(section).is_object() ? &file_.at(section) : nullptr,
        &file_}) {
    if (!scope) continue;
    for (const std::string& k : {key, flag_name(key).substr(2)})
      if (scope->contains(k) && !scope->at(k).is_object()) {
        raw.file = scope->at(k);
        raw.source = "file";
        return raw;
      }
  }
  return raw;
}

void Settings::record(const std::string& key, const nlohmann::json& value, const std::string& source) {
  resolved_[key] = {{"value", value}, {"source", source}};
}

template <class T>
std::optional<T> Settings::typed(const std::string& key) {
  const Raw raw = lookup(key);
  std::optional<T> v;
  if (raw.text) {
    v = parse_text<T>(key, *raw.text);
  } else if (raw.file) {
    try {
      if constexpr (std::is_same_v<T, std::string>)
        v = raw.file->is_string() ? raw.file->get<std::string>() : raw.file->dump();
      else
        v = raw.file->get<T>();
    } catch (const nlohmann::json::exception&) {
      throw UsageError("config file value for '" + key + "' has the wrong type");
    }
  }
  if (v) record(key, *v, raw.source);
  return v;
}

std::string Settings::str(const std::string& key, const std::string& def) {
  if (auto v = typed<std::string>(key)) return *v;
  record(key, def, "default");
  return def;
}

std::optional<std::string> Settings::maybe_str(const std::string& key) {
  return typed<std::string>(key);
}

std::string Settings::required(const std::string& key) {
  if (auto v = typed<std::string>(key); v && !v->empty()) return *v;
  throw UsageError(command_.get_name() + ": " + flag_name(key) + " is required");
}

long long Settings::integer(const std::string& key, long long def) {
  if (auto v = typed<long long>(key)) return *v;
  record(key, def, "default");
  return def;
}

std::uint64_t Settings::unsigned_integer(const std::string& key, std::uint64_t def) {
  if (auto v = typed<std::uint64_t>(key)) return *v;
  record(key, def, "default");
  return def;
}

double Settings::number(const std::string& key, double def) {
  if (auto v = typed<double>(key)) return *v;
  record(key, def, "default");
  return def;
}

std::optional<double> Settings::maybe_number(const std::string& key) {
  return typed<double>(key);
}

bool Settings::flag(const std::string& key, bool def) {
  if (auto v = typed<bool>(key)) return *v;
  record(key, def, "default");
  return def;
}

}  // namespace wozlab::cli
