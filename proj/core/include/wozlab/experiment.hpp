#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>

#include <nlohmann/json.hpp>

#include "wozlab/persona.hpp"

namespace wozlab {

enum class Stage { Simulated, Human };

const char* to_string(Stage s);
Stage stage_from_string(const std::string& s);

struct TopicGoal {
  std::string id;
  std::string topic;
  std::string goal;

  bool operator==(const TopicGoal&) const = default;
};

/// The three conversation topics with their persuasion goals.
const std::array<TopicGoal, 3>& builtin_topic_goals();
const TopicGoal& topic_goal_by_id(const std::string& id);

inline constexpr std::array<double, 3> kWizardTemperatures = {0.5, 1.0, 1.5};
inline constexpr double kDefaultTemperature = 1.0;
inline constexpr int kDefaultTurnLimit = 12;
inline constexpr int kFactorCombinations = 27;

struct ExperimentConfig {
  bool bot_identity_disclosure = false;
  bool wizard_demo_disclosure = false;
  bool simulacrum_demo_disclosure = false;
  int instruction_granularity = 1;
  std::optional<TopicGoal> topic_goal;
  double wizard_temperature = kDefaultTemperature;
  double simulacrum_temperature = kDefaultTemperature;
  Persona wizard_persona;
  // For human sessions this holds the participant's self-reported profile.
  Persona simulacrum_persona;
  std::uint64_t seed = 0;
  int turn_limit = kDefaultTurnLimit;
  Stage stage = Stage::Simulated;

  /// Returns a copy with the disclosure coupling applied: a wizard that
  /// discloses being a bot never discloses its demographics.
  ExperimentConfig coupled() const;

  /// Throws ValidationError on any broken invariant.
  void validate() const;

  /// Cell index in the 3 (disclosure pair) x 3 (granularity) x 3
  /// (temperature) grid, 0..26.
  int combination_index() const;

  bool operator==(const ExperimentConfig&) const = default;
};

/// Human-readable label of a grid cell, e.g. "bot=1 demo=0 gran=2 temp=0.5".
std::string combination_label(int index);

/// Sets the five factor levels of `cfg` to those of grid cell `index`.
void apply_combination(ExperimentConfig& cfg, int index);

/// Stage-2 defaults: bot identity and demographics hidden, EV persuasion at
/// granularity 3, wizard temperature 1.
ExperimentConfig stage2_default_config();

void to_json(nlohmann::json& j, const ExperimentConfig& c);
void from_json(const nlohmann::json& j, ExperimentConfig& c);

}  // namespace wozlab
