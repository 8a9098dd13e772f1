#pragma once

#include <array>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "wozlab/metrics.hpp"
#include "wozlab/segments.hpp"

namespace wozlab {

struct Descriptive {
  double mean = 0.0;
  std::optional<double> sd;  // sample sd; undefined for n = 1
  std::size_t n = 0;
};

/// Throws AnalysisError on an empty sample.
Descriptive descriptive(std::span<const double> sample);

enum class TestKind { WelchT, AnovaF };
const char* to_string(TestKind k);

struct GroupSummary {
  std::string label;
  Descriptive stats;
};

struct TestResult {
  TestKind kind = TestKind::WelchT;
  std::string label;
  double statistic = 0.0;
  double df = 0.0;   // t df, or F numerator df
  double df2 = 0.0;  // F denominator df; 0 for t
  double p_value = 1.0;
  std::vector<GroupSummary> groups;

  bool significant(double alpha = 0.05) const { return p_value < alpha; }
};

void to_json(nlohmann::json& j, const Descriptive& d);
void to_json(nlohmann::json& j, const TestResult& r);

/// Welch's unequal-variance t test, two-sided. Throws UndefinedMetricError
/// when either sample has fewer than 2 values or both variances are zero.
TestResult welch_t_test(std::span<const double> x, std::span<const double> y,
                        std::string x_label = "x", std::string y_label = "y");

struct AnovaFactor {
  std::string name;
  std::vector<std::string> levels;  // one label per observation
  /// Levels that must be present; a declared level without observations
  /// is an empty cell.
  std::vector<std::string> declared_levels;
};

/// Main-effects model, sequential (type I) sums of squares in the order
/// given. One F test per factor. Throws AnalysisError naming the cell when
/// a level is empty or has fewer than 2 observations, and
/// UndefinedMetricError when the residual variance is zero.
std::vector<TestResult> anova_main_effects(std::span<const double> values,
                                           const std::vector<AnovaFactor>& factors);

enum class AggregationUnit {
  Conversation,  // one value per (conversation, segment): the mean
  Message,       // every message value
};
const char* to_string(AggregationUnit u);
AggregationUnit aggregation_unit_from_string(std::string_view s);

/// Speaker filter. The interlocutor is the simulacrum in simulated runs
/// and the participant in human sessions.
enum class Role { Wizard, Interlocutor, Any };
const char* to_string(Role r);
Role role_from_string(std::string_view s);
bool role_matches(Role r, Speaker s);

struct SegmentedSeries {
  std::string metric;
  Role role = Role::Any;
  AggregationUnit unit = AggregationUnit::Conversation;
  std::array<std::vector<double>, 3> by_segment;
  /// Conversation ids matching by_segment entries in Conversation mode.
  std::array<std::vector<std::string>, 3> sources;
};

/// Groups present values of `metric` by segment. Records are visited in
/// (transcript_id, message_index) order so the result does not depend on
/// input order.
SegmentedSeries segmented_series(const std::vector<MetricRecord>& records,
                                 const std::string& metric, Role role,
                                 AggregationUnit unit = AggregationUnit::Conversation);

/// Per-conversation mean of `metric`, in transcript id order. Conversations
/// with no value for the metric are skipped.
std::vector<double> per_conversation_means(const std::vector<MetricRecord>& records,
                                           const std::string& metric, Role role);

}  // namespace wozlab
