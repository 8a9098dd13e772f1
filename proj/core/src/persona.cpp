#include "wozlab/persona.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <set>

#include "wozlab/data_files.hpp"
#include "wozlab/error.hpp"

namespace wozlab {

void DemographicDimension::validate() const {
  if (name.empty()) throw ConfigError("dimension without a name");
  if (options.empty()) throw ConfigError("dimension '" + name + "' has no options");
  std::set<std::string> seen;
  for (const auto& o : options) {
    if (!seen.insert(o).second)
      throw ConfigError("dimension '" + name + "' lists option '" + o + "' twice");
  }
  if (weights.size() != options.size())
    throw ConfigError("dimension '" + name + "' has " + std::to_string(weights.size()) +
                      " weights for " + std::to_string(options.size()) + " options");
  double total = 0.0;
  for (double w : weights) {
    if (!(w >= 0.0) || !std::isfinite(w))
      throw ConfigError("dimension '" + name + "' has a negative or non-finite weight");
    total += w;
  }
  if (std::abs(total - 1.0) > 1e-9)
    throw ConfigError("weights of dimension '" + name + "' sum to " + std::to_string(total));
}

std::size_t DemographicDimension::index_of(std::string_view label) const {
  auto it = std::find(options.begin(), options.end(), label);
  if (it == options.end())
    throw ValidationError("'" + std::string(label) + "' is not an option of dimension '" + name +
                          "'");
  return static_cast<std::size_t>(it - options.begin());
}

bool DemographicDimension::contains(std::string_view label) const {
  return std::find(options.begin(), options.end(), label) != options.end();
}

const std::string& Persona::value(std::string_view d) const {
  if (d == "age") return age;
  if (d == "income") return income;
  if (d == "education") return education;
  if (d == "politics") return politics;
  if (d == "gender") return gender;
  if (d == "ethnicity") return ethnicity;
  throw ValidationError("unknown demographic dimension '" + std::string(d) + "'");
}

std::string& Persona::value(std::string_view d) {
  return const_cast<std::string&>(std::as_const(*this).value(d));
}

void to_json(nlohmann::json& j, const Persona& p) {
  j = nlohmann::json{{"name", p.display_name}, {"age", p.age},
                     {"income", p.income},     {"education", p.education},
                     {"politics", p.politics}, {"gender", p.gender},
                     {"ethnicity", p.ethnicity}};
}

void from_json(const nlohmann::json& j, Persona& p) {
  p.display_name = j.value("name", std::string{});
  for (auto d : kDimensionNames) p.value(d) = j.at(std::string(d)).get<std::string>();
}

DimensionSet::DimensionSet(std::vector<DemographicDimension> dims) {
  for (const auto& d : dims) d.validate();
  for (auto name : kDimensionNames) {
    auto n = std::count_if(dims.begin(), dims.end(), [&](const auto& d) { return d.name == name; });
    if (n == 0) throw ConfigError("missing demographic dimension '" + std::string(name) + "'");
    if (n > 1) throw ConfigError("duplicate demographic dimension '" + std::string(name) + "'");
  }
  if (dims.size() != std::size(kDimensionNames)) {
    for (const auto& d : dims) {
      if (std::find(std::begin(kDimensionNames), std::end(kDimensionNames), d.name) ==
          std::end(kDimensionNames))
        throw ConfigError("unexpected demographic dimension '" + d.name + "'");
    }
  }
  // Canonical order so sampling consumes random draws identically however
  // the file is arranged.
  for (auto name : kDimensionNames) {
    auto it = std::find_if(dims.begin(), dims.end(), [&](const auto& d) { return d.name == name; });
    dims_.push_back(std::move(*it));
  }
}

DimensionSet DimensionSet::from_json(const nlohmann::json& j) {
  std::vector<DemographicDimension> dims;
  const auto& arr = j.contains("dimensions") ? j.at("dimensions") : j;
  if (!arr.is_array()) throw ConfigError("distribution file must hold a 'dimensions' array");
  for (const auto& e : arr) {
    DemographicDimension d;
    d.name = e.at("name").get<std::string>();
    d.options = e.at("options").get<std::vector<std::string>>();
    d.weights = e.at("weights").get<std::vector<double>>();
    const auto kind = e.value("kind", std::string("nominal"));
    if (kind == "ordinal") d.kind = DimensionKind::Ordinal;
    else if (kind == "nominal") d.kind = DimensionKind::Nominal;
    else throw ConfigError("dimension '" + d.name + "' has unknown kind '" + kind + "'");
    dims.push_back(std::move(d));
  }
  return DimensionSet(std::move(dims));
}

DimensionSet DimensionSet::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open distribution file " + path.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("malformed distribution file " + path.string() + ": " + e.what());
  }
  return from_json(j);
}

const DimensionSet& DimensionSet::default_us() {
  static const DimensionSet set = load(data_file("demographics_us.json"));
  return set;
}

const DemographicDimension& DimensionSet::at(std::string_view name) const {
  for (const auto& d : dims_)
    if (d.name == name) return d;
  throw ValidationError("unknown demographic dimension '" + std::string(name) + "'");
}

void DimensionSet::check_persona(const Persona& p) const {
  for (const auto& d : dims_) {
    if (!d.contains(p.value(d.name)))
      throw ValidationError("persona " + d.name + " '" + p.value(d.name) +
                            "' is not an option of the dimension set");
  }
}

nlohmann::json DimensionSet::to_json() const {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& d : dims_) {
    arr.push_back({{"name", d.name},
                   {"options", d.options},
                   {"weights", d.weights},
                   {"kind", d.kind == DimensionKind::Ordinal ? "ordinal" : "nominal"}});
  }
  return {{"dimensions", arr}};
}

Persona sample_persona(const DimensionSet& dims, Rng& rng, std::string display_name) {
  Persona p;
  p.display_name = std::move(display_name);
  for (const auto& d : dims.dimensions()) p.value(d.name) = d.options[rng.categorical(d.weights)];
  return p;
}

Persona sample_persona(std::span<const DemographicDimension> dims, std::uint64_t seed,
                       std::string display_name) {
  DimensionSet set(std::vector<DemographicDimension>(dims.begin(), dims.end()));
  Rng rng(seed);
  return sample_persona(set, rng, std::move(display_name));
}

double demographic_distance(const Persona& a, const Persona& b, const DimensionSet& dims) {
  double sum = 0.0;
  for (const auto& d : dims.dimensions()) {
    const auto ia = d.index_of(a.value(d.name));
    const auto ib = d.index_of(b.value(d.name));
    if (d.kind == DimensionKind::Ordinal) {
      if (d.options.size() > 1) {
        const double diff = ia > ib ? double(ia - ib) : double(ib - ia);
        sum += diff / double(d.options.size() - 1);
      }
    } else {
      sum += ia == ib ? 0.0 : 1.0;
    }
  }
  return sum / double(dims.dimensions().size());
}

}  // namespace wozlab
