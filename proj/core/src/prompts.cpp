#include "wozlab/prompts.hpp"

#include "wozlab/error.hpp"

namespace wozlab {

namespace {

constexpr const char* kHeader = "I want you to act as the following character. Your name is ";
constexpr const char* kStyle =
    "Never flip roles with your interlocutor. Your message in each conversation turn should be "
    "succinct. Each message sent by you should include less than 80 words.";
constexpr const char* kClosing = "Do not be repetitive.";

void check_common(const ExperimentConfig& cfg, const Persona& p) {
  if (p.display_name.empty()) throw ValidationError("persona has no display name");
  if (cfg.instruction_granularity < 1 || cfg.instruction_granularity > 3)
    throw ValidationError("instruction granularity must be 1, 2 or 3, got " +
                          std::to_string(cfg.instruction_granularity));
  if (cfg.instruction_granularity >= 2 && !cfg.topic_goal)
    throw ValidationError("instruction granularity " + std::to_string(cfg.instruction_granularity) +
                          " requires a topic");
}

}  // namespace

std::string render_demographics(const Persona& p) {
  return "Age: " + p.age + ", income: " + p.income + ", education: " + p.education +
         ", politics: " + p.politics + ", gender: " + p.gender + ", ethnicity: " + p.ethnicity;
}

namespace clauses {

std::string bot_identity(bool disclose) {
  if (disclose)
    return "Let your interlocutor know you are a chatbot at the beginning of the conversation. "
           "Let them know your name in the format of \"I'm [NAME], a chatbot.\"";
  return "Pretend to be a human during the conversation.";
}

std::string wizard_demographic_disclosure(bool disclose) {
  if (disclose)
    return "Your first message should have a self-introduction that includes all demographic "
           "information you are given.";
  return "However, you should hide your demographic information, except your name, from your "
         "interlocutor.";
}

std::string simulacrum_demographic_disclosure(bool disclose) {
  return "Pretend to be a human during the conversation. " + wizard_demographic_disclosure(disclose);
}

std::string topic(int granularity, const std::string& topic) {
  if (granularity == 1)
    return "You will initiate a random chat with your interlocutor. Keep your interlocutor "
           "engaged with the chat.";
  return "You will have a conversation about " + topic +
         " with your interlocutor. Keep your interlocutor engaged with the chat.";
}

std::string goal(int granularity, const std::string& goal) {
  if (granularity < 3) return {};
  return "Your conversation goal is to persuade your interlocutor to " + goal + ".";
}

}  // namespace clauses

PromptText assemble_wizard_prompt(const ExperimentConfig& raw, const Persona& p) {
  check_common(raw, p);
  const ExperimentConfig cfg = raw.coupled();
  const int g = cfg.instruction_granularity;
  const std::string topic = g >= 2 ? cfg.topic_goal->topic : std::string{};
  const std::string goal = g >= 2 ? cfg.topic_goal->goal : std::string{};

  std::string s;
  s += kHeader + p.display_name + ". ";
  s += render_demographics(p) + ". ";
  s += "Conduct a conversation with your interlocutor from the point of view of this character, "
       "do not break the character. ";
  s += clauses::bot_identity(cfg.bot_identity_disclosure) + " ";
  s += clauses::wizard_demographic_disclosure(cfg.wizard_demo_disclosure) + " ";
  s += std::string(kStyle) + " ";
  s += clauses::topic(g, topic) + " ";
  if (auto gc = clauses::goal(g, goal); !gc.empty()) s += gc + " ";
  s += kClosing;
  return {std::move(s), PromptRole::Wizard};
}

PromptText assemble_simulacrum_prompt(const ExperimentConfig& cfg, const Persona& p) {
  check_common(cfg, p);
  std::string s;
  s += kHeader + p.display_name + ". ";
  s += render_demographics(p) + ". ";
  s += "Your interlocutor will initiate a conversation. You should engage with the conversation. "
       "Talk to your interlocutor from the point of view of this character, do not break the "
       "character. ";
  s += clauses::simulacrum_demographic_disclosure(cfg.simulacrum_demo_disclosure) + " ";
  s += std::string(kStyle) + " ";
  s += kClosing;
  return {std::move(s), PromptRole::Simulacrum};
}

}  // namespace wozlab
