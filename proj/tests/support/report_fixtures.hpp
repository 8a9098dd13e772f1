#pragma once

// Constructed batches for the report and comparison checks.

#include <cmath>
#include <random>
#include <string>
#include <vector>

#include "test_support.hpp"
#include "wozlab/engine.hpp"
#include "wozlab/metrics.hpp"
#include "wozlab/mock_providers.hpp"
#include "wozlab/report.hpp"

namespace testing {

inline std::string random_sentence(std::mt19937_64& rng, int words = 12) {
  static const char* pool[] = {
      "solar",   "panels", "roof",    "energy",  "grid",    "battery", "charge",  "cost",
      "savings", "winter", "summer",  "heat",    "pump",    "kitchen", "stove",   "induction",
      "car",     "range",  "commute", "weekend", "budget",  "rebate",  "tax",     "credit",
      "install", "quote",  "local",   "shop",    "neighbor", "friend", "family",  "house",
      "garden",  "water",  "light",   "bulb",    "window",  "door",    "wall",    "attic",
      "think",   "maybe",  "really",  "often",   "later",   "soon",    "today",   "month"};
  std::uniform_int_distribution<std::size_t> pick(0, std::size(pool) - 1);
  std::string s;
  for (int i = 0; i < words; ++i) {
    if (i) s += ' ';
    s += pool[pick(rng)];
  }
  return s + ".";
}

inline wozlab::ExperimentConfig fixture_config(std::uint64_t seed, int cell) {
  return wozlab::randomize_config_for_cell(seed, wozlab::DimensionSet::default_us(), cell);
}

inline wozlab::ConversationTranscript fixture_transcript(const std::string& id,
                                                         const std::vector<std::string>& texts,
                                                         const wozlab::ExperimentConfig& cfg) {
  return alternating_transcript(id, texts, cfg);
}

/// Wizard messages in the last segment repeat the final segment-2 wizard
/// message verbatim; everything else is random text.
inline std::vector<wozlab::ConversationTranscript> rising_repetition_batch(std::size_t n,
                                                                          std::uint64_t seed = 11) {
  std::mt19937_64 rng(seed);
  std::vector<wozlab::ConversationTranscript> out;
  for (std::size_t c = 0; c < n; ++c) {
    std::vector<std::string> texts;
    std::string last_segment2;
    for (int i = 0; i < 25; ++i) {
      const int turn = (i + 1) / 2;
      const bool wizard = i % 2 == 0;
      if (wizard && turn >= 9) {
        texts.push_back(last_segment2);
        continue;
      }
      texts.push_back(random_sentence(rng));
      if (wizard && turn == 8) last_segment2 = texts.back();
    }
    out.push_back(fixture_transcript("rep-" + std::to_string(100 + c), texts,
                                     fixture_config(seed + c, static_cast<int>(c % 27))));
  }
  return out;
}

/// Each speaker repeats one neutral message throughout, identically in
/// every conversation. Nothing varies with segment, factor or group.
inline std::vector<wozlab::ConversationTranscript> null_batch(std::size_t n, std::uint64_t seed = 5) {
  std::vector<std::string> texts;
  for (int i = 0; i < 25; ++i)
    texts.push_back(i % 2 == 0 ? "The meeting is on Tuesday at the office."
                               : "Noted, I will check the schedule then.");
  std::vector<wozlab::ConversationTranscript> out;
  for (std::size_t c = 0; c < n; ++c)
    out.push_back(fixture_transcript("null-" + std::to_string(100 + c), texts,
                                     fixture_config(seed + c, static_cast<int>(c % 27))));
  return out;
}

/// The published excerpt that contains a duplicated message.
inline wozlab::ConversationTranscript excerpt_transcript() {
  std::vector<std::string> texts;
  for (const auto& m : reference_messages().at("conversation")) texts.push_back(m.at("text"));
  wozlab::ExperimentConfig cfg = fixture_config(3, 4);
  cfg.wizard_persona.display_name = "Jamie";
  cfg.simulacrum_persona.display_name = "Leslie";
  return fixture_transcript("excerpt", texts, cfg);
}

inline std::vector<wozlab::MetricRecord> evaluate_all(
    const std::vector<wozlab::ConversationTranscript>& ts, const wozlab::Evaluator& ev) {
  std::vector<wozlab::MetricRecord> out;
  for (const auto& t : ts)
    for (auto& r : ev.evaluate_transcript(t)) out.push_back(std::move(r));
  return out;
}

/// n values with exactly the given sample mean and sd.
inline std::vector<double> with_moments(std::size_t n, double mean, double sd, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> z;
  std::vector<double> v(n);
  for (auto& x : v) x = z(rng);
  double m = 0.0;
  for (double x : v) m += x;
  m /= static_cast<double>(n);
  double ss = 0.0;
  for (double x : v) ss += (x - m) * (x - m);
  const double s = std::sqrt(ss / static_cast<double>(n - 1));
  for (auto& x : v) x = mean + sd * (x - m) / s;
  return v;
}

/// A batch whose per-conversation wizard semantic self-similarity has the
/// requested moments. Other metrics are left absent.
inline wozlab::BatchInputs planted_batch(const std::string& label, std::size_t n, double mean,
                                         double sd, std::uint64_t seed,
                                         const wozlab::MetricProvenance& prov) {
  wozlab::BatchInputs b;
  b.label = label;
  b.provenance = prov;
  const auto values = with_moments(n, mean, sd, seed);
  for (std::size_t c = 0; c < n; ++c) {
    const std::string id = label + "-" + std::to_string(c);
    b.transcripts.push_back(fixture_transcript(id, {"a", "b", "c"}, fixture_config(seed + c, static_cast<int>(c % 27))));
    wozlab::MetricRecord r;
    r.transcript_id = id;
    r.message_index = 2;
    r.turn_index = 1;
    r.sem_sim_prev_own = values[c];
    b.records.push_back(r);
  }
  return b;
}

inline wozlab::MetricProvenance mock_provenance() {
  wozlab::GatewayOptions o;
  o.sleeper = [](std::chrono::milliseconds) {};
  wozlab::EmbeddingGateway eg(std::make_shared<wozlab::HashingEmbeddingBackend>(), o);
  wozlab::ToxicityGateway tg(std::make_shared<wozlab::TableToxicityBackend>(), o);
  return wozlab::Evaluator(&eg, &tg).provenance();
}

}  // namespace testing
