#include "wozlab/stats.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>
#include <tuple>

#include <Eigen/Dense>

#include "wozlab/distributions.hpp"
#include "wozlab/error.hpp"

namespace wozlab {
namespace {

// Shifted by the first value so a constant sample has exactly that mean
// and zero variance.
double mean_of(std::span<const double> x) {
  double s = 0.0;
  for (double v : x) s += v - x[0];
  return x[0] + s / static_cast<double>(x.size());
}

double sample_variance(std::span<const double> x, double mean) {
  double ss = 0.0;
  for (double v : x) ss += (v - mean) * (v - mean);
  return ss / static_cast<double>(x.size() - 1);
}

// Residual sum of squares of the least-squares fit and the rank of X.
std::pair<double, Eigen::Index> fit(const Eigen::MatrixXd& X, const Eigen::VectorXd& y) {
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(X);
  qr.setThreshold(1e-10);
  const Eigen::VectorXd beta = qr.solve(y);
  const Eigen::VectorXd r = y - X * beta;
  return {r.squaredNorm(), qr.rank()};
}

}  // namespace

Descriptive descriptive(std::span<const double> sample) {
  if (sample.empty()) throw AnalysisError("descriptive statistics of an empty sample");
  Descriptive d;
  d.n = sample.size();
  d.mean = mean_of(sample);
  if (d.n >= 2) d.sd = std::sqrt(sample_variance(sample, d.mean));
  return d;
}

const char* to_string(TestKind k) { return k == TestKind::WelchT ? "welch_t" : "anova_f"; }

void to_json(nlohmann::json& j, const Descriptive& d) {
  j = {{"mean", d.mean}, {"n", d.n}};
  j["sd"] = d.sd ? nlohmann::json(*d.sd) : nlohmann::json(nullptr);
}

void to_json(nlohmann::json& j, const TestResult& r) {
  nlohmann::json groups = nlohmann::json::array();
  for (const auto& g : r.groups) groups.push_back({{"label", g.label}, {"stats", g.stats}});
  j = {{"test", to_string(r.kind)}, {"label", r.label},       {"statistic", r.statistic},
       {"df", r.df},                {"p_value", r.p_value},   {"groups", groups}};
  if (r.kind == TestKind::AnovaF) j["df2"] = r.df2;
}

TestResult welch_t_test(std::span<const double> x, std::span<const double> y,
                        std::string x_label, std::string y_label) {
  if (x.size() < 2 || y.size() < 2)
    throw UndefinedMetricError("t test undefined: each sample needs at least 2 values (got " +
                               std::to_string(x.size()) + " and " + std::to_string(y.size()) + ")");
  const double mx = mean_of(x), my = mean_of(y);
  const double vx = sample_variance(x, mx), vy = sample_variance(y, my);
  if (!std::isfinite(vx) || !std::isfinite(vy))
    throw UndefinedMetricError("t test undefined: non-finite variance");
  const double sx = vx / static_cast<double>(x.size());
  const double sy = vy / static_cast<double>(y.size());
  const double se2 = sx + sy;
  if (se2 <= 0.0) throw UndefinedMetricError("t test undefined: both samples have zero variance");

  TestResult r;
  r.kind = TestKind::WelchT;
  r.label = x_label + " vs " + y_label;
  r.statistic = (mx - my) / std::sqrt(se2);
  const double nx1 = static_cast<double>(x.size()) - 1.0;
  const double ny1 = static_cast<double>(y.size()) - 1.0;
  r.df = se2 * se2 / (sx * sx / nx1 + sy * sy / ny1);
  r.p_value = student_t_two_sided_p(r.statistic, r.df);
  r.groups = {{std::move(x_label), descriptive(x)}, {std::move(y_label), descriptive(y)}};
  return r;
}

std::vector<TestResult> anova_main_effects(std::span<const double> values,
                                           const std::vector<AnovaFactor>& factors) {
  const auto n = static_cast<Eigen::Index>(values.size());
  if (factors.empty()) throw AnalysisError("ANOVA needs at least one factor");

  // Level order: declared first, then first appearance.
  std::vector<std::vector<std::string>> level_sets;
  for (const auto& f : factors) {
    if (f.levels.size() != values.size())
      throw ValidationError("factor '" + f.name + "' has " + std::to_string(f.levels.size()) +
                            " labels for " + std::to_string(values.size()) + " observations");
    std::vector<std::string> levels = f.declared_levels;
    for (const auto& l : f.levels)
      if (std::find(levels.begin(), levels.end(), l) == levels.end()) levels.push_back(l);
    for (const auto& l : levels) {
      const auto count = std::count(f.levels.begin(), f.levels.end(), l);
      if (count == 0) throw AnalysisError("empty cell: factor '" + f.name + "' level '" + l + "'");
      if (count < 2)
        throw AnalysisError("cell with a single observation: factor '" + f.name + "' level '" +
                            l + "'");
    }
    if (levels.size() < 2)
      throw AnalysisError("factor '" + f.name + "' has only one level");
    level_sets.push_back(std::move(levels));
  }

  Eigen::VectorXd y(n);
  for (Eigen::Index i = 0; i < n; ++i) y(i) = values[static_cast<std::size_t>(i)];

  // Columns: intercept, then treatment-coded dummies per factor.
  Eigen::Index cols = 1;
  for (const auto& ls : level_sets) cols += static_cast<Eigen::Index>(ls.size()) - 1;
  Eigen::MatrixXd X = Eigen::MatrixXd::Zero(n, cols);
  X.col(0).setOnes();
  std::vector<Eigen::Index> ends;
  Eigen::Index c = 1;
  for (std::size_t f = 0; f < factors.size(); ++f) {
    const auto& ls = level_sets[f];
    for (std::size_t l = 1; l < ls.size(); ++l, ++c)
      for (Eigen::Index i = 0; i < n; ++i)
        X(i, c) = factors[f].levels[static_cast<std::size_t>(i)] == ls[l] ? 1.0 : 0.0;
    ends.push_back(c);
  }

  std::vector<std::pair<double, Eigen::Index>> fits;
  fits.push_back(fit(X.leftCols(1), y));
  for (auto e : ends) fits.push_back(fit(X.leftCols(e), y));
  const double rss = fits.back().first;
  const double df_resid = static_cast<double>(n - fits.back().second);
  if (df_resid <= 0) throw AnalysisError("ANOVA has no residual degrees of freedom");
  // Relative to the total variation, so an exact fit is recognized despite
  // rounding in the decomposition.
  const double tss = fits.front().first;
  if (rss <= 1e-24 * std::max(1.0, tss))
    throw UndefinedMetricError("ANOVA undefined: residual variance is zero");
  const double mse = rss / df_resid;

  std::vector<TestResult> out;
  for (std::size_t f = 0; f < factors.size(); ++f) {
    TestResult r;
    r.kind = TestKind::AnovaF;
    r.label = factors[f].name;
    const double ss = std::max(0.0, fits[f].first - fits[f + 1].first);
    const double df = static_cast<double>(fits[f + 1].second - fits[f].second);
    r.df = df;
    r.df2 = df_resid;
    if (df <= 0) {
      // Fully aliased with earlier factors: nothing left to explain.
      r.statistic = 0.0;
      r.p_value = 1.0;
    } else {
      r.statistic = (ss / df) / mse;
      r.p_value = f_upper_tail(r.statistic, df, df_resid);
    }
    for (const auto& l : level_sets[f]) {
      std::vector<double> g;
      for (std::size_t i = 0; i < values.size(); ++i)
        if (factors[f].levels[i] == l) g.push_back(values[i]);
      r.groups.push_back({l, descriptive(g)});
    }
    out.push_back(std::move(r));
  }
  return out;
}

const char* to_string(AggregationUnit u) {
  return u == AggregationUnit::Conversation ? "conversation" : "message";
}

AggregationUnit aggregation_unit_from_string(std::string_view s) {
  if (s == "conversation") return AggregationUnit::Conversation;
  if (s == "message") return AggregationUnit::Message;
  throw ValidationError("unknown aggregation unit '" + std::string(s) + "'");
}

namespace {

std::vector<const MetricRecord*> sorted_view(const std::vector<MetricRecord>& records) {
  std::vector<const MetricRecord*> v;
  v.reserve(records.size());
  for (const auto& r : records) v.push_back(&r);
  std::sort(v.begin(), v.end(), [](const MetricRecord* a, const MetricRecord* b) {
    return std::tie(a->transcript_id, a->message_index) <
           std::tie(b->transcript_id, b->message_index);
  });
  return v;
}

}  // namespace

const char* to_string(Role r) {
  switch (r) {
    case Role::Wizard: return "wizard";
    case Role::Interlocutor: return "interlocutor";
    case Role::Any: return "any";
  }
  return "any";
}

Role role_from_string(std::string_view s) {
  if (s == "wizard") return Role::Wizard;
  if (s == "interlocutor" || s == "simulacrum" || s == "participant") return Role::Interlocutor;
  if (s == "any" || s == "all") return Role::Any;
  throw ValidationError("unknown speaker role '" + std::string(s) + "'");
}

bool role_matches(Role r, Speaker s) {
  if (r == Role::Any) return true;
  return (r == Role::Wizard) == is_wizard(s);
}

SegmentedSeries segmented_series(const std::vector<MetricRecord>& records,
                                 const std::string& metric, Role role,
                                 AggregationUnit unit) {
  if (!is_metric_name(metric)) throw ValidationError("unknown metric '" + metric + "'");
  SegmentedSeries s;
  s.metric = metric;
  s.role = role;
  s.unit = unit;
  // (transcript, segment) -> (sum, count), in key order.
  std::map<std::pair<std::string, int>, std::pair<double, std::size_t>> acc;
  for (const MetricRecord* r : sorted_view(records)) {
    if (!role_matches(role, r->speaker)) continue;
    const auto v = r->value(metric);
    if (!v) continue;
    if (r->segment < 1 || r->segment > 3)
      throw IntegrityError("metric record with segment " + std::to_string(r->segment));
    const auto k = static_cast<std::size_t>(r->segment - 1);
    if (unit == AggregationUnit::Message) {
      s.by_segment[k].push_back(*v);
      s.sources[k].push_back(r->transcript_id);
    } else {
      auto& a = acc[{r->transcript_id, r->segment}];
      a.first += *v;
      ++a.second;
    }
  }
  for (const auto& [key, a] : acc) {
    const auto k = static_cast<std::size_t>(key.second - 1);
    s.by_segment[k].push_back(a.first / static_cast<double>(a.second));
    s.sources[k].push_back(key.first);
  }
  return s;
}

std::vector<double> per_conversation_means(const std::vector<MetricRecord>& records,
                                           const std::string& metric, Role role) {
  if (!is_metric_name(metric)) throw ValidationError("unknown metric '" + metric + "'");
  std::map<std::string, std::pair<double, std::size_t>> acc;
  for (const auto& r : records) {
    if (!role_matches(role, r.speaker)) continue;
    if (const auto v = r.value(metric)) {
      auto& a = acc[r.transcript_id];
      a.first += *v;
      ++a.second;
    }
  }
  std::vector<double> out;
  out.reserve(acc.size());
  for (const auto& [id, a] : acc) out.push_back(a.first / static_cast<double>(a.second));
  return out;
}

}  // namespace wozlab
