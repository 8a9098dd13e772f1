#pragma once

#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "wozlab/gateway.hpp"
#include "wozlab/readability.hpp"
#include "wozlab/transcript.hpp"

namespace wozlab {

/// Per-message scores. Absent optionals are metrics that are undefined for
/// the message (no predecessor) or failed to compute; failures carry a
/// reason in `missing`. Absent values are never treated as zero.
struct MetricRecord {
  std::string transcript_id;
  std::size_t message_index = 0;
  Speaker speaker = Speaker::Wizard;
  int turn_index = 0;
  int segment = 1;

  std::optional<double> toxicity;
  std::optional<bool> is_toxic;
  std::optional<double> sentiment_compound;
  std::optional<double> readability_raw;
  std::optional<double> readability_norm;
  std::optional<double> sem_sim_prev_own;
  std::optional<double> sem_sim_prev_other;
  std::optional<double> lcs_sim_prev_own;
  std::optional<double> lcs_sim_prev_other;

  std::map<std::string, std::string> missing;  // field -> reason

  /// Numeric value of a metric by field name; is_toxic reads as 0/1.
  /// Throws ValidationError for an unknown name.
  std::optional<double> value(std::string_view metric) const;

  bool operator==(const MetricRecord&) const = default;
};

/// Field names accepted by MetricRecord::value.
const std::vector<std::string>& metric_names();
bool is_metric_name(std::string_view name);

void to_json(nlohmann::json& j, const MetricRecord& r);
void from_json(const nlohmann::json& j, MetricRecord& r);

struct MessageSimilarity {
  std::optional<double> sem_prev_own;
  std::optional<double> sem_prev_other;
  std::optional<double> lcs_prev_own;
  std::optional<double> lcs_prev_other;
  std::map<std::string, std::string> missing;
};

/// Message i against message i-1 (the other speaker) and i-2 (the same
/// speaker). Semantic fields need `embeddings`; when it is null, or the
/// embedding call fails, those fields are absent with a reason. Negative
/// cosines are stored as 0 so the field stays in [0, 1].
std::vector<MessageSimilarity> message_similarities(const ConversationTranscript& t,
                                                    EmbeddingGateway* embeddings);

struct MetricConfig {
  double toxicity_threshold = 0.5;
  ReadabilityConfig readability;
};

/// Identifies everything that can change a metric value. Two batches are
/// comparable only when their provenance matches.
struct MetricProvenance {
  std::string sentiment_lexicon;
  std::string readability;
  std::string embedding_provider;
  std::string embedding_model;
  std::string toxicity_provider;
  std::string toxicity_model;
  double toxicity_threshold = 0.5;

  nlohmann::json to_json() const;
  static MetricProvenance from_json(const nlohmann::json& j);
  /// One "field: a != b" line per differing field.
  std::vector<std::string> diff(const MetricProvenance& other) const;
  bool operator==(const MetricProvenance&) const = default;
};

class Evaluator {
 public:
  /// Either gateway may be null; its fields are then recorded as missing.
  Evaluator(EmbeddingGateway* embeddings, ToxicityGateway* toxicity, MetricConfig cfg = {});

  std::vector<MetricRecord> evaluate_transcript(const ConversationTranscript& t) const;
  MetricRecord evaluate_message(const ConversationTranscript& t, std::size_t index) const;
  MetricProvenance provenance() const;
  const MetricConfig& config() const { return cfg_; }

 private:
  EmbeddingGateway* embeddings_;
  ToxicityGateway* toxicity_;
  MetricConfig cfg_;
};

// Metric files hold one record per line.
void write_metrics(const std::filesystem::path& path, const std::vector<MetricRecord>& records);
std::vector<MetricRecord> read_metrics(const std::filesystem::path& path);

}  // namespace wozlab
