#include "wozlab/experiment.hpp"

#include <cmath>
#include <sstream>

#include "wozlab/error.hpp"

namespace wozlab {

const char* to_string(Stage s) { return s == Stage::Simulated ? "simulated" : "human"; }

Stage stage_from_string(const std::string& s) {
  if (s == "simulated") return Stage::Simulated;
  if (s == "human") return Stage::Human;
  throw ValidationError("unknown stage '" + s + "'");
}

const std::array<TopicGoal, 3>& builtin_topic_goals() {
  static const std::array<TopicGoal, 3> pairs = {{
      {"ev", "attitude towards electric vehicles", "adopt an electric vehicle"},
      {"household",
       "attitude towards green household electrification (e.g., adopt solar panels and use "
       "power during non-peak hours)",
       "implement sustainable household electrification"},
      {"charity", "attitude towards donation to charities",
       "donate to the \"Save the Children\" organization"},
  }};
  return pairs;
}

const TopicGoal& topic_goal_by_id(const std::string& id) {
  for (const auto& tg : builtin_topic_goals())
    if (tg.id == id) return tg;
  throw ValidationError("unknown topic '" + id + "'");
}

namespace {

int temperature_index(double t) {
  for (std::size_t i = 0; i < kWizardTemperatures.size(); ++i)
    if (std::abs(kWizardTemperatures[i] - t) < 1e-9) return static_cast<int>(i);
  return -1;
}

}  // namespace

ExperimentConfig ExperimentConfig::coupled() const {
  ExperimentConfig c = *this;
  if (c.bot_identity_disclosure) c.wizard_demo_disclosure = false;
  return c;
}

void ExperimentConfig::validate() const {
  if (instruction_granularity < 1 || instruction_granularity > 3)
    throw ValidationError("instruction granularity must be 1, 2 or 3, got " +
                          std::to_string(instruction_granularity));
  if (instruction_granularity >= 2 && !topic_goal)
    throw ValidationError("instruction granularity " + std::to_string(instruction_granularity) +
                          " requires a topic");
  if (instruction_granularity == 1 && topic_goal)
    throw ValidationError("instruction granularity 1 is a random chat and takes no topic");
  if (bot_identity_disclosure && wizard_demo_disclosure)
    throw ValidationError("a wizard disclosing bot identity must hide its demographics");
  if (temperature_index(wizard_temperature) < 0)
    throw ValidationError("wizard temperature must be one of 0.5, 1.0, 1.5");
  if (!(simulacrum_temperature >= 0.0 && simulacrum_temperature <= 2.0))
    throw ValidationError("simulacrum temperature outside [0, 2]");
  if (turn_limit < 1) throw ValidationError("turn limit must be at least 1");
}

int ExperimentConfig::combination_index() const {
  const ExperimentConfig c = coupled();
  int pair = c.bot_identity_disclosure ? 0 : (c.wizard_demo_disclosure ? 1 : 2);
  const int t = temperature_index(c.wizard_temperature);
  if (c.instruction_granularity < 1 || c.instruction_granularity > 3 || t < 0)
    throw ValidationError("configuration lies outside the factor grid");
  return (pair * 3 + (c.instruction_granularity - 1)) * 3 + t;
}

void apply_combination(ExperimentConfig& cfg, int index) {
  if (index < 0 || index >= kFactorCombinations)
    throw ValidationError("combination index out of range: " + std::to_string(index));
  const int pair = index / 9;
  cfg.bot_identity_disclosure = pair == 0;
  cfg.wizard_demo_disclosure = pair == 1;
  cfg.instruction_granularity = (index / 3) % 3 + 1;
  cfg.wizard_temperature = kWizardTemperatures[static_cast<std::size_t>(index % 3)];
}

std::string combination_label(int index) {
  ExperimentConfig c;
  apply_combination(c, index);
  std::ostringstream os;
  os << "bot=" << c.bot_identity_disclosure << " demo=" << c.wizard_demo_disclosure
     << " gran=" << c.instruction_granularity << " temp=" << c.wizard_temperature;
  return os.str();
}

ExperimentConfig stage2_default_config() {
  ExperimentConfig c;
  c.bot_identity_disclosure = false;
  c.wizard_demo_disclosure = false;
  c.simulacrum_demo_disclosure = false;
  c.instruction_granularity = 3;
  c.topic_goal = topic_goal_by_id("ev");
  c.wizard_temperature = 1.0;
  c.stage = Stage::Human;
  return c;
}

void to_json(nlohmann::json& j, const ExperimentConfig& c) {
  j = nlohmann::json{{"bot_identity_disclosure", c.bot_identity_disclosure},
                     {"wizard_demo_disclosure", c.wizard_demo_disclosure},
                     {"simulacrum_demo_disclosure", c.simulacrum_demo_disclosure},
                     {"instruction_granularity", c.instruction_granularity},
                     {"wizard_temperature", c.wizard_temperature},
                     {"simulacrum_temperature", c.simulacrum_temperature},
                     {"wizard_persona", c.wizard_persona},
                     {"simulacrum_persona", c.simulacrum_persona},
                     {"seed", c.seed},
                     {"turn_limit", c.turn_limit},
                     {"stage", to_string(c.stage)}};
  if (c.topic_goal) {
    j["topic_goal"] = {
        {"id", c.topic_goal->id}, {"topic", c.topic_goal->topic}, {"goal", c.topic_goal->goal}};
  } else {
    j["topic_goal"] = nullptr;
  }
}

void from_json(const nlohmann::json& j, ExperimentConfig& c) {
  c.bot_identity_disclosure = j.at("bot_identity_disclosure").get<bool>();
  c.wizard_demo_disclosure = j.at("wizard_demo_disclosure").get<bool>();
  c.simulacrum_demo_disclosure = j.at("simulacrum_demo_disclosure").get<bool>();
  c.instruction_granularity = j.at("instruction_granularity").get<int>();
  c.wizard_temperature = j.at("wizard_temperature").get<double>();
  c.simulacrum_temperature = j.value("simulacrum_temperature", kDefaultTemperature);
  c.wizard_persona = j.at("wizard_persona").get<Persona>();
  c.simulacrum_persona = j.at("simulacrum_persona").get<Persona>();
  c.seed = j.value("seed", std::uint64_t{0});
  c.turn_limit = j.value("turn_limit", kDefaultTurnLimit);
  c.stage = stage_from_string(j.value("stage", std::string("simulated")));
  const auto& tg = j.at("topic_goal");
  if (tg.is_null()) {
    c.topic_goal.reset();
  } else {
    c.topic_goal = TopicGoal{tg.at("id").get<std::string>(), tg.at("topic").get<std::string>(),
                             tg.at("goal").get<std::string>()};
  }
}

}  // namespace wozlab
