#pragma once

#include <array>
#include <chrono>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "wozlab/experiment.hpp"
#include "wozlab/gateway.hpp"
#include "wozlab/persona.hpp"
#include "wozlab/prompts.hpp"
#include "wozlab/transcript.hpp"

namespace wozlab {

inline constexpr const char* kWizardName = "Jamie";
inline constexpr const char* kSimulacrumName = "Leslie";

struct AgentNames {
  std::string wizard = kWizardName;
  std::string simulacrum = kSimulacrumName;
};

/// Uniform draw over each factor's levels and a fresh persona per agent,
/// with the disclosure coupling applied. Deterministic in `seed`.
ExperimentConfig randomize_config(std::uint64_t seed, const DimensionSet& dims,
                                  const AgentNames& names = {});

/// Pins the five factors to grid cell `cell`, keeping everything else from
/// the seeded draw. Topic presence follows the granularity.
ExperimentConfig randomize_config_for_cell(std::uint64_t seed, const DimensionSet& dims,
                                           int cell, const AgentNames& names = {});

enum class TimestampMode {
  Logical,  // fixed epoch plus one second per message; reproducible
  Wall,     // system clock
};

struct EngineOptions {
  int word_limit = 80;  // prompted, not enforced; violations are noted
  TimestampMode timestamps = TimestampMode::Logical;
  int max_attempts = 3;
  std::chrono::milliseconds request_timeout{60000};
  std::string transcript_id;  // derived from the config seed when empty
  /// Called once with the finished transcript, complete or failed.
  std::function<void(const ConversationTranscript&)> persist;
};

std::string transcript_id_for(std::uint64_t seed);
int count_words(std::string_view text);

/// History as seen by one agent: its own messages are assistant turns,
/// the other agent's are user turns.
std::vector<ChatTurn> history_for(Speaker agent, const std::vector<Message>& messages);

/// Wizard opening, then turn_limit exchanges of (simulacrum, wizard). A
/// provider failure or refusal ends the conversation as failed, keeping
/// the messages produced so far.
ConversationTranscript run_closed_loop(const ExperimentConfig& cfg, ChatGateway& gateway,
                                       const EngineOptions& opts = {});

struct CoverageReport {
  std::array<std::size_t, kFactorCombinations> counts{};     // runs assigned
  std::array<std::size_t, kFactorCombinations> completed{};  // runs completed

  std::size_t cells_covered() const;
  std::vector<int> missing() const;
  nlohmann::json to_json() const;
};

struct RunStatus {
  std::size_t index = 0;
  std::string transcript_id;
  std::uint64_t seed = 0;
  int combination = -1;  // -1 when no valid config was produced
  TranscriptStatus status = TranscriptStatus::Complete;
  std::string reason;
};

struct BatchOptions {
  std::size_t n = 0;
  std::uint64_t seed = 0;
  std::size_t parallelism = 1;
  bool stratified = false;  // run i uses grid cell i mod 27
  int turn_limit = kDefaultTurnLimit;
  std::string batch_id = "batch";
  AgentNames names;
  EngineOptions engine;
};

struct BatchResult {
  std::string batch_id;
  std::vector<ConversationTranscript> transcripts;  // in run order
  std::vector<RunStatus> runs;
  std::size_t completed = 0;
  std::size_t failed = 0;
  CoverageReport coverage;

  nlohmann::json summary() const;
};

/// The config run `index` of a batch would use.
ExperimentConfig batch_config(const BatchOptions& opts, const DimensionSet& dims,
                              std::size_t index);

/// Runs n conversations on up to `parallelism` threads. Per-run seeds are
/// derived from the batch seed, so output does not depend on scheduling.
/// A failing run is recorded and never aborts the batch. When `store` is
/// given every transcript is committed to it in run order.
BatchResult run_batch(const BatchOptions& opts, const DimensionSet& dims, ChatGateway& gateway,
                      TranscriptStore* store = nullptr);

}  // namespace wozlab
