#pragma once

#include <string>

#include "wozlab/experiment.hpp"
#include "wozlab/persona.hpp"

namespace wozlab {

enum class PromptRole { Wizard, Simulacrum };

struct PromptText {
  std::string text;
  PromptRole role = PromptRole::Wizard;
};

/// "Age: ..., income: ..., education: ..., politics: ..., gender: ...,
/// ethnicity: ..." with no trailing period.
std::string render_demographics(const Persona& p);

// Template clauses. Each is one or more complete sentences carrying its own
// terminal punctuation; the assembled prompt joins clauses with one space.
namespace clauses {
std::string bot_identity(bool disclose);
std::string wizard_demographic_disclosure(bool disclose);
std::string simulacrum_demographic_disclosure(bool disclose);
std::string topic(int granularity, const std::string& topic);
/// Empty below granularity 3.
std::string goal(int granularity, const std::string& goal);
}  // namespace clauses

/// Wizard system prompt. Applies the disclosure coupling before rendering.
/// Throws ValidationError on granularity outside 1..3 or a missing topic.
PromptText assemble_wizard_prompt(const ExperimentConfig& cfg, const Persona& p);
PromptText assemble_simulacrum_prompt(const ExperimentConfig& cfg, const Persona& p);

}  // namespace wozlab
