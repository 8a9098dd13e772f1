#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "wozlab/random.hpp"

namespace wozlab {

enum class DimensionKind { Ordinal, Nominal };

struct DemographicDimension {
  std::string name;
  std::vector<std::string> options;
  std::vector<double> weights;
  DimensionKind kind = DimensionKind::Nominal;

  /// Throws ConfigError when options are empty or duplicated, or when the
  /// weights are negative or do not sum to 1 within 1e-9.
  void validate() const;
  /// Position of `label` in options; throws ValidationError if absent.
  std::size_t index_of(std::string_view label) const;
  bool contains(std::string_view label) const;
};

/// The six dimensions every persona carries, in prompt order.
inline constexpr std::string_view kDimensionNames[] = {
    "age", "income", "education", "politics", "gender", "ethnicity"};

struct Persona {
  std::string display_name;
  std::string age;
  std::string income;
  std::string education;
  std::string politics;
  std::string gender;
  std::string ethnicity;

  const std::string& value(std::string_view dimension) const;
  std::string& value(std::string_view dimension);

  bool operator==(const Persona&) const = default;
};

void to_json(nlohmann::json& j, const Persona& p);
void from_json(const nlohmann::json& j, Persona& p);

// Exactly the six named dimensions, each appearing once.
class DimensionSet {
 public:
  DimensionSet() = default;
  explicit DimensionSet(std::vector<DemographicDimension> dims);

  static DimensionSet from_json(const nlohmann::json& j);
  static DimensionSet load(const std::filesystem::path& path);
  /// The shipped approximate US distribution (data/demographics_us.json).
  static const DimensionSet& default_us();

  const DemographicDimension& at(std::string_view name) const;
  std::span<const DemographicDimension> dimensions() const { return dims_; }

  /// Throws ValidationError naming the first field that is not a member of
  /// its dimension's options.
  void check_persona(const Persona& p) const;

  nlohmann::json to_json() const;

 private:
  std::vector<DemographicDimension> dims_;
};

/// Draws each field independently from its dimension's categorical
/// distribution. Throws ConfigError on missing or duplicate dimensions.
Persona sample_persona(std::span<const DemographicDimension> dims, std::uint64_t seed,
                       std::string display_name = {});
Persona sample_persona(const DimensionSet& dims, Rng& rng, std::string display_name = {});

/// Mean over the six dimensions of the normalized per-dimension difference:
/// rank distance / (options - 1) for ordinal dimensions, 0/1 mismatch for
/// nominal ones. Symmetric and in [0, 1].
double demographic_distance(const Persona& a, const Persona& b, const DimensionSet& dims);

}  // namespace wozlab
