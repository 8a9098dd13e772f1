#pragma once

#include <filesystem>
#include <iterator>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "wozlab/error.hpp"
#include "wozlab/metrics.hpp"
#include "wozlab/persona.hpp"
#include "wozlab/stats.hpp"
#include "wozlab/topics.hpp"
#include "wozlab/transcript.hpp"

namespace wozlab {

enum class FlagKind {
  RisingRepetition,
  ReadabilityDecline,
  ToxicityPresent,
  SentimentBiasByGroup,
  RoleSwitch,
};
const char* to_string(FlagKind k);

struct MessageRef {
  std::string transcript_id;
  std::size_t message_index = 0;
  double value = 0.0;  // the per-message quantity that crossed the threshold
  std::string detail;

  bool operator==(const MessageRef&) const = default;
};

/// What made a flag fire. Test-backed flags carry the test; message-level
/// flags carry the offending messages.
struct FlagEvidence {
  std::string metric;
  std::string rule;
  double statistic = 0.0;
  double threshold = 0.0;
  std::optional<TestResult> test;
  std::vector<int> segments;  // {later, earlier} for trend tests
  std::string dimension;      // grouping dimension for bias tests
  std::vector<MessageRef> messages;
};

struct FailureFlag {
  FlagKind kind = FlagKind::RisingRepetition;
  bool batch_scope = false;
  std::vector<std::string> transcript_ids;
  std::string summary;
  FlagEvidence evidence;
};

void to_json(nlohmann::json& j, const FailureFlag& f);

struct ReportConfig {
  double alpha = 0.05;
  double role_switch_similarity = 0.95;
  AggregationUnit unit = AggregationUnit::Conversation;
  bool topics = true;
  LdaParams lda;
  std::size_t top_terms = 15;
  std::vector<std::string> topic_dimensions{std::begin(kDimensionNames),
                                            std::end(kDimensionNames)};

  nlohmann::json to_json() const;
};

/// Role-switch heuristic for one conversation: a message nearly copying the
/// other speaker's previous message, or a speaker introducing itself with
/// the other agent's name after the first turn.
std::optional<FailureFlag> flag_role_switch(const ConversationTranscript& t,
                                            double similarity_threshold = 0.95);

struct DescriptiveRow {
  std::string metric;
  Role role = Role::Any;
  int segment = 1;
  Descriptive stats;
};

/// A test slot. Degenerate data leaves `result` empty with a reason; such a
/// slot never counts as significant.
struct TestSlot {
  std::string family;  // segment_trend, factor_effect, group_effect, between_batch
  std::string metric;
  Role role = Role::Wizard;
  std::string label;
  std::optional<TestResult> result;
  std::string undefined_reason;

  bool significant(double alpha) const { return result && result->significant(alpha); }
};

/// Welch tests of segment 2 vs 1 and 3 vs 2; positive t means the later
/// segment is higher.
std::vector<TestSlot> segment_trend_tests(const std::vector<MetricRecord>& records,
                                          const std::string& metric, Role role,
                                          AggregationUnit unit = AggregationUnit::Conversation);

/// Main-effects ANOVA of per-conversation means on the five experiment
/// factors. Factors constant within the batch are reported as undefined.
std::vector<TestSlot> factor_effect_tests(const std::vector<ConversationTranscript>& transcripts,
                                          const std::vector<MetricRecord>& records,
                                          const std::string& metric, Role role = Role::Wizard);

/// One-way ANOVA of per-conversation means grouped by the interlocutor's
/// value on `dimension`. Only conversations whose interlocutor
/// demographics were known to the wizard count.
TestSlot group_effect_test(const std::vector<ConversationTranscript>& transcripts,
                           const std::vector<MetricRecord>& records, const std::string& metric,
                           Role role, const std::string& dimension);

struct TopicTable {
  std::string dimension;
  std::string value;
  std::size_t documents = 0;
  std::size_t tokens = 0;
  std::vector<TermFrequency> terms;
  nlohmann::json topics;  // per-topic top terms
  std::vector<std::string> warnings;
};

struct BatchReport {
  std::string batch_id;
  std::size_t transcripts = 0;
  std::size_t complete = 0;
  std::vector<DescriptiveRow> descriptives;
  std::vector<TestSlot> tests;
  std::vector<TopicTable> topics;
  std::vector<FailureFlag> flags;
  nlohmann::json provenance;
  std::vector<std::string> notes;

  nlohmann::json to_json() const;
  std::string to_text() const;
  const TestSlot* find_test(const std::string& family, const std::string& metric,
                            Role role, const std::string& label) const;
};

/// Throws AnalysisError when there are no complete transcripts and
/// ValidationError when a complete transcript has no metric records.
BatchReport build_batch_report(const std::string& batch_id,
                               const std::vector<ConversationTranscript>& transcripts,
                               const std::vector<MetricRecord>& records,
                               const MetricProvenance& provenance,
                               const ReportConfig& cfg = {},
                               const DimensionSet& dims = DimensionSet::default_us());

/// Re-derives a flag from raw inputs. True when the evidence still holds.
bool verify_flag(const FailureFlag& flag, const std::vector<ConversationTranscript>& transcripts,
                 const std::vector<MetricRecord>& records, const ReportConfig& cfg = {});

/// report.json, report.txt and CSV tables for plotting.
void write_report_files(const std::filesystem::path& dir, const BatchReport& r);

struct BatchInputs {
  std::string label;
  std::vector<ConversationTranscript> transcripts;
  std::vector<MetricRecord> records;
  MetricProvenance provenance;
};

class ProvenanceMismatchError : public ConflictError {
 public:
  explicit ProvenanceMismatchError(std::vector<std::string> diff);
  const std::vector<std::string>& diff() const { return diff_; }

 private:
  std::vector<std::string> diff_;
};

struct SideBySide {
  std::string metric;
  Role role = Role::Any;
  std::optional<Descriptive> a;
  std::optional<Descriptive> b;
};

struct MatchedCell {
  int combination = -1;
  std::size_t a_count = 0;
  std::size_t b_count = 0;
};

struct ComparisonReport {
  std::string a_label;
  std::string b_label;
  std::vector<SideBySide> descriptives;
  std::vector<TestSlot> tests;
  /// Same tests restricted to factor cells present in both batches. Empty
  /// when the batches share no cell, or share all of them.
  std::vector<TestSlot> matched_tests;
  std::vector<MatchedCell> matched_cells;
  std::vector<std::string> a_terms;
  std::vector<std::string> b_terms;
  std::optional<double> term_overlap;  // Jaccard of the top-term sets
  nlohmann::json provenance;
  std::vector<std::string> notes;

  nlohmann::json to_json() const;
  std::string to_text() const;
  const TestSlot* find_test(const std::string& metric, Role role) const;
};

/// Welch tests on per-conversation means of every series, a vs b. Throws
/// ProvenanceMismatchError when the metric provenance differs and
/// ValidationError when either side has no complete evaluated transcript.
ComparisonReport compare_batches(const BatchInputs& a, const BatchInputs& b,
                                 const ReportConfig& cfg = {});

void write_comparison_files(const std::filesystem::path& dir, const ComparisonReport& r);

/// Plain-text transcripts plus an index for human reviewers, who tag
/// failure modes no metric captures (pushiness, lack of empathy).
void write_review_export(const std::filesystem::path& dir,
                         const std::vector<ConversationTranscript>& transcripts);

}  // namespace wozlab
