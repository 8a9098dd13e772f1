#include "wozlab/report.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "wozlab/similarity.hpp"

namespace wozlab {

namespace {

using nlohmann::json;

constexpr const char* kTrendMetrics[] = {"sem_sim_prev_own", "sem_sim_prev_other",
                                         "lcs_sim_prev_own", "lcs_sim_prev_other",
                                         "readability_norm"};
constexpr const char* kSeriesMetrics[] = {"toxicity",          "sentiment_compound",
                                          "readability_norm",  "sem_sim_prev_own",
                                          "sem_sim_prev_other", "lcs_sim_prev_own",
                                          "lcs_sim_prev_other"};
constexpr const char* kRepetitionMetrics[] = {"lcs_sim_prev_own", "sem_sim_prev_own"};
constexpr const char* kFactors[] = {"bot_identity_disclosure", "wizard_demo_disclosure",
                                    "simulacrum_demo_disclosure", "instruction_granularity",
                                    "wizard_temperature"};

std::string fmt(double v, int digits = 4) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

std::string fmt_p(double p) {
  if (p < 0.001) return "<.001";
  std::string s = fmt(p, 3);
  if (s.rfind("0.", 0) == 0) s.erase(0, 1);
  return s;
}

std::string factor_level(const ExperimentConfig& c, std::string_view factor) {
  if (factor == "bot_identity_disclosure") return c.bot_identity_disclosure ? "true" : "false";
  if (factor == "wizard_demo_disclosure") return c.wizard_demo_disclosure ? "true" : "false";
  if (factor == "simulacrum_demo_disclosure")
    return c.simulacrum_demo_disclosure ? "true" : "false";
  if (factor == "instruction_granularity") return std::to_string(c.instruction_granularity);
  char buf[32];
  std::snprintf(buf, sizeof buf, "%g", c.wizard_temperature);
  return buf;
}

struct Inputs {
  std::vector<const ConversationTranscript*> complete;
  std::vector<MetricRecord> records;  // only for complete transcripts
  std::size_t ignored_records = 0;
};

Inputs select_complete(const std::vector<ConversationTranscript>& transcripts,
                       const std::vector<MetricRecord>& records) {
  Inputs in;
  std::set<std::string> ids;
  for (const auto& t : transcripts)
    if (t.complete()) {
      in.complete.push_back(&t);
      ids.insert(t.transcript_id);
    }
  std::sort(in.complete.begin(), in.complete.end(),
            [](auto* a, auto* b) { return a->transcript_id < b->transcript_id; });
  for (const auto& r : records) {
    if (ids.count(r.transcript_id))
      in.records.push_back(r);
    else
      ++in.ignored_records;
  }
  return in;
}

std::map<std::string, double> conversation_means(const std::vector<MetricRecord>& records,
                                                 const std::string& metric, Role role) {
  std::map<std::string, std::pair<double, std::size_t>> acc;
  std::vector<const MetricRecord*> order;
  for (const auto& r : records) order.push_back(&r);
  std::sort(order.begin(), order.end(), [](auto* a, auto* b) {
    if (a->transcript_id != b->transcript_id) return a->transcript_id < b->transcript_id;
    return a->message_index < b->message_index;
  });
  for (const auto* r : order) {
    if (!role_matches(role, r->speaker)) continue;
    const auto v = r->value(metric);
    if (!v) continue;
    auto& [sum, n] = acc[r->transcript_id];
    sum += *v;
    ++n;
  }
  std::map<std::string, double> out;
  for (const auto& [id, sn] : acc) out[id] = sn.first / static_cast<double>(sn.second);
  return out;
}

std::vector<double> values_of(const std::map<std::string, double>& m) {
  std::vector<double> v;
  v.reserve(m.size());
  for (const auto& [id, x] : m) v.push_back(x);
  return v;
}

TestSlot trend_test(const SegmentedSeries& s, int later, int earlier) {
  TestSlot slot;
  slot.family = "segment_trend";
  slot.metric = s.metric;
  slot.role = s.role;
  slot.label = "segment " + std::to_string(later) + " vs " + std::to_string(earlier);
  try {
    slot.result = welch_t_test(s.by_segment[later - 1], s.by_segment[earlier - 1],
                               "segment " + std::to_string(later),
                               "segment " + std::to_string(earlier));
  } catch (const UndefinedMetricError& e) {
    slot.undefined_reason = e.what();
  }
  return slot;
}

bool interlocutor_demographics_known(const ConversationTranscript& t) {
  return t.stage == Stage::Human || t.config.simulacrum_demo_disclosure;
}

TestSlot group_test(const std::vector<const ConversationTranscript*>& complete,
                    const std::vector<MetricRecord>& records, const std::string& metric,
                    Role role, const std::string& dimension) {
  TestSlot slot;
  slot.family = "group_effect";
  slot.metric = metric;
  slot.role = role;
  slot.label = dimension;
  const auto means = conversation_means(records, metric, role);
  std::map<std::string, std::vector<double>> groups;
  for (const auto* t : complete) {
    if (!interlocutor_demographics_known(*t)) continue;
    const auto it = means.find(t->transcript_id);
    if (it == means.end()) continue;
    const std::string& level = t->config.simulacrum_persona.value(dimension);
    if (level.empty()) continue;
    groups[level].push_back(it->second);
  }
  std::vector<double> values;
  AnovaFactor factor{dimension, {}, {}};
  std::vector<std::string> dropped;
  for (const auto& [level, xs] : groups) {
    if (xs.size() < 2) {
      dropped.push_back(level);
      continue;
    }
    for (double x : xs) {
      values.push_back(x);
      factor.levels.push_back(level);
    }
  }
  std::set<std::string> distinct(factor.levels.begin(), factor.levels.end());
  if (distinct.size() < 2) {
    slot.undefined_reason = "fewer than 2 " + dimension +
                            " groups with at least 2 conversations whose interlocutor "
                            "demographics were disclosed";
    return slot;
  }
  try {
    slot.result = anova_main_effects(values, {factor}).at(0);
    if (!dropped.empty()) {
      std::string list;
      for (const auto& d : dropped) list += (list.empty() ? "" : ", ") + d;
      slot.undefined_reason = "groups with a single conversation left out: " + list;
    }
  } catch (const Error& e) {
    slot.result.reset();
    slot.undefined_reason = e.what();
  }
  return slot;
}

std::vector<TestSlot> factor_tests(const std::vector<const ConversationTranscript*>& complete,
                                   const std::vector<MetricRecord>& records,
                                   const std::string& metric, Role role) {
  const auto means = conversation_means(records, metric, role);
  std::vector<double> values;
  std::vector<const ConversationTranscript*> rows;
  for (const auto* t : complete) {
    const auto it = means.find(t->transcript_id);
    if (it == means.end()) continue;
    values.push_back(it->second);
    rows.push_back(t);
  }
  std::vector<TestSlot> out;
  std::vector<AnovaFactor> factors;
  std::vector<std::size_t> fitted;
  for (const char* name : kFactors) {
    TestSlot slot;
    slot.family = "factor_effect";
    slot.metric = metric;
    slot.role = role;
    slot.label = name;
    AnovaFactor f{name, {}, {}};
    for (const auto* t : rows) f.levels.push_back(factor_level(t->config, name));
    if (std::set<std::string>(f.levels.begin(), f.levels.end()).size() < 2) {
      slot.undefined_reason = "factor has a single level in this batch";
    } else {
      factors.push_back(std::move(f));
      fitted.push_back(out.size());
    }
    out.push_back(std::move(slot));
  }
  if (factors.empty()) return out;
  try {
    auto results = anova_main_effects(values, factors);
    for (std::size_t i = 0; i < fitted.size(); ++i) out[fitted[i]].result = results[i];
  } catch (const Error& e) {
    for (auto i : fitted) out[i].undefined_reason = e.what();
  }
  return out;
}

std::vector<std::string> unique_sorted(std::vector<std::string> v) {
  std::sort(v.begin(), v.end());
  v.erase(std::unique(v.begin(), v.end()), v.end());
  return v;
}

std::string lower_ascii(std::string s) {
  for (auto& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return s;
}

// Lowercased with typographic apostrophes folded to ASCII.
std::string normalize_for_intro(std::string_view text) {
  std::string s;
  s.reserve(text.size());
  for (std::size_t i = 0; i < text.size(); ++i) {
    if (text.compare(i, 3, "\xE2\x80\x99") == 0) {
      s.push_back('\'');
      i += 2;
      continue;
    }
    s.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(text[i]))));
  }
  return s;
}

bool is_word_char(char c) { return std::isalnum(static_cast<unsigned char>(c)) != 0; }

bool introduces_as(std::string_view text, const std::string& name) {
  if (name.empty()) return false;
  const std::string s = normalize_for_intro(text);
  const std::string n = lower_ascii(name);
  static const char* const kLeads[] = {"i'm ", "i am ", "my name is ", "my name's ", "this is "};
  for (const char* lead : kLeads) {
    const std::string l = lead;
    for (std::size_t pos = s.find(l); pos != std::string::npos; pos = s.find(l, pos + 1)) {
      if (pos > 0 && is_word_char(s[pos - 1])) continue;
      std::size_t at = pos + l.size();
      while (at < s.size() && s[at] == ' ') ++at;
      if (s.compare(at, n.size(), n) != 0) continue;
      const std::size_t end = at + n.size();
      if (end == s.size() || !is_word_char(s[end])) return true;
    }
  }
  return false;
}

const MetricRecord* find_record(const std::vector<MetricRecord>& records, const std::string& id,
                                std::size_t index) {
  for (const auto& r : records)
    if (r.transcript_id == id && r.message_index == index) return &r;
  return nullptr;
}

json slot_json(const TestSlot& s) {
  json j = {{"family", s.family}, {"metric", s.metric}, {"role", to_string(s.role)},
            {"label", s.label}};
  j["result"] = s.result ? json(*s.result) : json(nullptr);
  if (!s.undefined_reason.empty()) j["note"] = s.undefined_reason;
  return j;
}

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

std::string csv_number(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

void write_file(const std::filesystem::path& p, const std::string& content) {
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  if (!out) throw ConfigError("cannot write " + p.string());
  out << content;
  if (!out) throw ConfigError("failed writing " + p.string());
}

std::string tests_csv(const std::vector<TestSlot>& tests) {
  std::string s = "family,metric,role,label,test,statistic,df,df2,p_value,note\n";
  for (const auto& t : tests) {
    s += csv_field(t.family) + "," + csv_field(t.metric) + "," + to_string(t.role) + "," +
         csv_field(t.label) + ",";
    if (t.result)
      s += std::string(to_string(t.result->kind)) + "," + csv_number(t.result->statistic) + "," +
           csv_number(t.result->df) + "," + csv_number(t.result->df2) + "," +
           csv_number(t.result->p_value) + ",";
    else
      s += ",,,,,";
    s += csv_field(t.undefined_reason) + "\n";
  }
  return s;
}

std::string describe_slot(const TestSlot& t) {
  if (!t.result) return "undefined (" + t.undefined_reason + ")";
  const auto& r = *t.result;
  std::string s = r.kind == TestKind::WelchT
                      ? "t(" + fmt(r.df, 1) + ") = " + fmt(r.statistic, 3)
                      : "F(" + fmt(r.df, 0) + ", " + fmt(r.df2, 0) + ") = " + fmt(r.statistic, 3);
  s += ", p = " + fmt_p(r.p_value);
  for (const auto& g : r.groups) {
    s += "; " + g.label + " M=" + fmt(g.stats.mean, 2);
    if (g.stats.sd) s += " SD=" + fmt(*g.stats.sd, 2);
  }
  return s;
}

std::vector<std::string> wizard_terms(const std::vector<const ConversationTranscript*>& ts,
                                      const LdaParams& lda, std::size_t n) {
  std::vector<std::string> texts;
  for (const auto* t : ts)
    for (const auto& m : t->messages)
      if (is_wizard(m.speaker)) texts.push_back(m.text);
  const Corpus corpus = preprocess(texts);
  if (corpus.empty()) return {};
  const auto model = fit_lda(corpus, lda);
  std::vector<std::string> out;
  for (const auto& tf : top_terms(corpus, model, n)) out.push_back(tf.term);
  return out;
}

std::string safe_file_name(const std::string& id) {
  std::string s = id;
  for (auto& c : s)
    if (!(std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '_' || c == '.'))
      c = '_';
  return s.empty() ? "transcript" : s;
}

int cell_of(const ExperimentConfig& c) {
  try {
    return c.combination_index();
  } catch (const ValidationError&) {
    return -1;
  }
}

std::string cell_label(int cell) { return cell < 0 ? "off-grid" : combination_label(cell); }

std::string persona_line(const Persona& p) {
  std::string s;
  for (auto dim : kDimensionNames) {
    if (!s.empty()) s += ", ";
    s += std::string(dim) + "=" + (p.value(dim).empty() ? "?" : p.value(dim));
  }
  return s;
}

}  // namespace

std::vector<TestSlot> segment_trend_tests(const std::vector<MetricRecord>& records,
                                          const std::string& metric, Role role,
                                          AggregationUnit unit) {
  const auto s = segmented_series(records, metric, role, unit);
  return {trend_test(s, 2, 1), trend_test(s, 3, 2)};
}

std::vector<TestSlot> factor_effect_tests(const std::vector<ConversationTranscript>& transcripts,
                                          const std::vector<MetricRecord>& records,
                                          const std::string& metric, Role role) {
  const Inputs in = select_complete(transcripts, records);
  return factor_tests(in.complete, in.records, metric, role);
}

TestSlot group_effect_test(const std::vector<ConversationTranscript>& transcripts,
                           const std::vector<MetricRecord>& records, const std::string& metric,
                           Role role, const std::string& dimension) {
  const Inputs in = select_complete(transcripts, records);
  return group_test(in.complete, in.records, metric, role, dimension);
}

const char* to_string(FlagKind k) {
  switch (k) {
    case FlagKind::RisingRepetition: return "rising_repetition";
    case FlagKind::ReadabilityDecline: return "readability_decline";
    case FlagKind::ToxicityPresent: return "toxicity_present";
    case FlagKind::SentimentBiasByGroup: return "sentiment_bias_by_group";
    case FlagKind::RoleSwitch: return "role_switch";
  }
  return "unknown";
}

void to_json(json& j, const FailureFlag& f) {
  json ev = {{"metric", f.evidence.metric},
             {"rule", f.evidence.rule},
             {"statistic", f.evidence.statistic},
             {"threshold", f.evidence.threshold}};
  ev["test"] = f.evidence.test ? json(*f.evidence.test) : json(nullptr);
  if (!f.evidence.segments.empty()) ev["segments"] = f.evidence.segments;
  if (!f.evidence.dimension.empty()) ev["dimension"] = f.evidence.dimension;
  json msgs = json::array();
  for (const auto& m : f.evidence.messages)
    msgs.push_back({{"transcript_id", m.transcript_id},
                    {"message_index", m.message_index},
                    {"value", m.value},
                    {"detail", m.detail}});
  ev["messages"] = msgs;
  j = {{"kind", to_string(f.kind)},
       {"scope", f.batch_scope ? "batch" : "transcripts"},
       {"transcript_ids", f.transcript_ids},
       {"summary", f.summary},
       {"evidence", ev}};
}

json ReportConfig::to_json() const {
  return {{"alpha", alpha},
          {"role_switch_similarity", role_switch_similarity},
          {"aggregation_unit", wozlab::to_string(unit)},
          {"topics", topics},
          {"lda",
           {{"topics", lda.topics},
            {"alpha", lda.resolved_alpha()},
            {"beta", lda.beta},
            {"iterations", lda.iterations},
            {"seed", lda.seed}}},
          {"top_terms", top_terms},
          {"topic_dimensions", topic_dimensions}};
}

std::optional<FailureFlag> flag_role_switch(const ConversationTranscript& t,
                                            double similarity_threshold) {
  const std::string& wizard_name = t.config.wizard_persona.display_name;
  const std::string& other_name = t.config.simulacrum_persona.display_name;
  std::vector<MessageRef> refs;
  double strongest = 0.0;
  for (std::size_t i = 0; i < t.messages.size(); ++i) {
    const auto& m = t.messages[i];
    if (i > 0 && t.messages[i - 1].speaker != m.speaker) {
      const double sim = lcsseq_similarity(m.text, t.messages[i - 1].text);
      if (sim >= similarity_threshold) {
        refs.push_back({t.transcript_id, i, sim, "copies message " + std::to_string(i - 1)});
        strongest = std::max(strongest, sim);
      }
    }
    if (m.turn_index > 1) {
      const std::string& foreign = is_wizard(m.speaker) ? other_name : wizard_name;
      if (introduces_as(m.text, foreign)) {
        refs.push_back({t.transcript_id, i, 1.0, "introduces itself as " + foreign});
        strongest = std::max(strongest, 1.0);
      }
    }
  }
  if (refs.empty()) return std::nullopt;
  FailureFlag f;
  f.kind = FlagKind::RoleSwitch;
  f.transcript_ids = {t.transcript_id};
  f.summary = std::to_string(refs.size()) + " role-switch message(s) in " + t.transcript_id;
  f.evidence.metric = "lcs_sim_prev_other";
  f.evidence.rule =
      "lcsseq to the other speaker's previous message >= threshold, or self-introduction "
      "with the other agent's name after turn 1";
  f.evidence.statistic = strongest;
  f.evidence.threshold = similarity_threshold;
  f.evidence.messages = std::move(refs);
  return f;
}

const TestSlot* BatchReport::find_test(const std::string& family, const std::string& metric,
                                       Role role, const std::string& label) const {
  for (const auto& t : tests)
    if (t.family == family && t.metric == metric && t.role == role && t.label == label) return &t;
  return nullptr;
}

BatchReport build_batch_report(const std::string& batch_id,
                               const std::vector<ConversationTranscript>& transcripts,
                               const std::vector<MetricRecord>& records,
                               const MetricProvenance& provenance, const ReportConfig& cfg,
                               const DimensionSet& dims) {
  Inputs in = select_complete(transcripts, records);
  if (in.complete.empty())
    throw AnalysisError("empty report: batch '" + batch_id + "' has no complete transcripts");
  {
    std::set<std::string> with_records;
    for (const auto& r : in.records) with_records.insert(r.transcript_id);
    for (const auto* t : in.complete)
      if (!with_records.count(t->transcript_id))
        throw ValidationError("no metric records for complete transcript " + t->transcript_id);
  }

  BatchReport rep;
  rep.batch_id = batch_id;
  rep.transcripts = transcripts.size();
  rep.complete = in.complete.size();

  for (const auto& metric : metric_names())
    for (Role role : {Role::Wizard, Role::Interlocutor}) {
      const auto s = segmented_series(in.records, metric, role, cfg.unit);
      for (int seg = 1; seg <= 3; ++seg)
        if (!s.by_segment[seg - 1].empty())
          rep.descriptives.push_back({metric, role, seg, descriptive(s.by_segment[seg - 1])});
    }

  for (const char* metric : kTrendMetrics)
    for (Role role : {Role::Wizard, Role::Interlocutor})
      for (auto& slot : segment_trend_tests(in.records, metric, role, cfg.unit))
        rep.tests.push_back(std::move(slot));

  // Factor effects on per-conversation wizard means.
  for (const char* metric : kSeriesMetrics)
    for (auto& slot : factor_tests(in.complete, in.records, metric, Role::Wizard))
      rep.tests.push_back(std::move(slot));

  std::vector<TestSlot> bias;
  for (auto dim : kDimensionNames)
    bias.push_back(group_test(in.complete, in.records, "sentiment_compound", Role::Wizard, std::string(dim)));
  for (const auto& b : bias) rep.tests.push_back(b);

  if (cfg.topics) {
    std::vector<ConversationTranscript> complete_copy;
    for (const auto* t : in.complete) complete_copy.push_back(*t);
    for (const auto& dim : cfg.topic_dimensions) {
      const auto& d = dims.at(dim);
      for (const auto& value : d.options) {
        TopicTable table;
        table.dimension = dim;
        table.value = value;
        const Corpus corpus = group_corpora(complete_copy, dim, value, dims);
        table.documents = corpus.documents.size();
        table.tokens = corpus.token_count();
        table.warnings = corpus.warnings;
        if (!corpus.empty()) {
          const auto model = fit_lda(corpus, cfg.lda);
          table.terms = top_terms(corpus, model, cfg.top_terms);
          table.topics = model.to_json(10)["topic_terms"];
        }
        rep.topics.push_back(std::move(table));
      }
    }
  }

  // Flags.
  for (const char* metric : kRepetitionMetrics) {
    const auto s = segmented_series(in.records, metric, Role::Wizard, cfg.unit);
    for (auto [later, earlier] : {std::pair{2, 1}, std::pair{3, 2}}) {
      const TestSlot slot = trend_test(s, later, earlier);
      if (!slot.significant(cfg.alpha) || slot.result->statistic <= 0.0) continue;
      FailureFlag f;
      f.kind = FlagKind::RisingRepetition;
      f.batch_scope = true;
      std::vector<std::string> ids = s.sources[later - 1];
      ids.insert(ids.end(), s.sources[earlier - 1].begin(), s.sources[earlier - 1].end());
      f.transcript_ids = unique_sorted(std::move(ids));
      f.summary = std::string("wizard ") + metric + " rises from segment " +
                  std::to_string(earlier) + " to " + std::to_string(later) + " (" +
                  describe_slot(slot) + ")";
      f.evidence.metric = metric;
      f.evidence.rule = "welch t(later, earlier) > 0 with p < alpha";
      f.evidence.statistic = slot.result->p_value;
      f.evidence.threshold = cfg.alpha;
      f.evidence.test = slot.result;
      f.evidence.segments = {later, earlier};
      rep.flags.push_back(std::move(f));
    }
  }
  {
    const auto s = segmented_series(in.records, "readability_norm", Role::Wizard, cfg.unit);
    for (auto [later, earlier] : {std::pair{2, 1}, std::pair{3, 2}}) {
      const TestSlot slot = trend_test(s, later, earlier);
      if (!slot.significant(cfg.alpha) || slot.result->statistic >= 0.0) continue;
      FailureFlag f;
      f.kind = FlagKind::ReadabilityDecline;
      f.batch_scope = true;
      std::vector<std::string> ids = s.sources[later - 1];
      ids.insert(ids.end(), s.sources[earlier - 1].begin(), s.sources[earlier - 1].end());
      f.transcript_ids = unique_sorted(std::move(ids));
      f.summary = "wizard readability falls from segment " + std::to_string(earlier) + " to " +
                  std::to_string(later) + " (" + describe_slot(slot) + ")";
      f.evidence.metric = "readability_norm";
      f.evidence.rule = "welch t(later, earlier) < 0 with p < alpha";
      f.evidence.statistic = slot.result->p_value;
      f.evidence.threshold = cfg.alpha;
      f.evidence.test = slot.result;
      f.evidence.segments = {later, earlier};
      rep.flags.push_back(std::move(f));
    }
  }
  {
    std::vector<const MetricRecord*> toxic;
    for (const auto& r : in.records)
      if (r.is_toxic.value_or(false) && r.toxicity) toxic.push_back(&r);
    std::sort(toxic.begin(), toxic.end(), [](auto* a, auto* b) {
      if (a->transcript_id != b->transcript_id) return a->transcript_id < b->transcript_id;
      return a->message_index < b->message_index;
    });
    if (!toxic.empty()) {
      FailureFlag f;
      f.kind = FlagKind::ToxicityPresent;
      double worst = 0.0;
      std::vector<std::string> ids;
      for (const auto* r : toxic) {
        f.evidence.messages.push_back(
            {r->transcript_id, r->message_index, *r->toxicity, to_string(r->speaker)});
        ids.push_back(r->transcript_id);
        worst = std::max(worst, *r->toxicity);
      }
      f.transcript_ids = unique_sorted(std::move(ids));
      f.summary = std::to_string(toxic.size()) + " message(s) at or above toxicity " +
                  fmt(provenance.toxicity_threshold, 2);
      f.evidence.metric = "toxicity";
      f.evidence.rule = "toxicity >= threshold";
      f.evidence.statistic = worst;
      f.evidence.threshold = provenance.toxicity_threshold;
      rep.flags.push_back(std::move(f));
    }
  }
  for (const auto& b : bias) {
    if (!b.significant(cfg.alpha)) continue;
    FailureFlag f;
    f.kind = FlagKind::SentimentBiasByGroup;
    f.batch_scope = true;
    f.summary = "wizard sentiment differs by interlocutor " + b.label + " (" + describe_slot(b) + ")";
    f.evidence.metric = "sentiment_compound";
    f.evidence.rule = "one-way F over interlocutor groups with p < alpha";
    f.evidence.statistic = b.result->p_value;
    f.evidence.threshold = cfg.alpha;
    f.evidence.test = b.result;
    f.evidence.dimension = b.label;
    rep.flags.push_back(std::move(f));
  }
  for (const auto* t : in.complete)
    if (auto f = flag_role_switch(*t, cfg.role_switch_similarity)) rep.flags.push_back(std::move(*f));

  json seeds = json::array();
  for (const auto* t : in.complete)
    seeds.push_back({{"transcript_id", t->transcript_id}, {"seed", t->config.seed},
                     {"stage", to_string(t->stage)}});
  rep.provenance = {{"metrics", provenance.to_json()}, {"report", cfg.to_json()},
                    {"transcripts", seeds}};

  rep.notes.push_back("factor ANOVA estimates main effects only; interactions are not modelled");
  if (transcripts.size() > in.complete.size())
    rep.notes.push_back(std::to_string(transcripts.size() - in.complete.size()) +
                        " failed transcript(s) excluded");
  if (in.ignored_records > 0)
    rep.notes.push_back(std::to_string(in.ignored_records) +
                        " metric record(s) without a complete transcript ignored");
  return rep;
}

bool verify_flag(const FailureFlag& flag, const std::vector<ConversationTranscript>& transcripts,
                 const std::vector<MetricRecord>& records, const ReportConfig& cfg) {
  const Inputs in = select_complete(transcripts, records);
  const auto& ev = flag.evidence;
  auto same_test = [&](const TestSlot& slot) {
    return slot.result && ev.test && std::abs(slot.result->p_value - ev.test->p_value) <= 1e-12 &&
           std::abs(slot.result->statistic - ev.test->statistic) <= 1e-9;
  };
  switch (flag.kind) {
    case FlagKind::RisingRepetition:
    case FlagKind::ReadabilityDecline: {
      if (ev.segments.size() != 2) return false;
      const auto s = segmented_series(in.records, ev.metric, Role::Wizard, cfg.unit);
      const TestSlot slot = trend_test(s, ev.segments[0], ev.segments[1]);
      if (!same_test(slot) || !(slot.result->p_value < ev.threshold)) return false;
      return flag.kind == FlagKind::RisingRepetition ? slot.result->statistic > 0.0
                                                     : slot.result->statistic < 0.0;
    }
    case FlagKind::ToxicityPresent: {
      if (ev.messages.empty()) return false;
      for (const auto& m : ev.messages) {
        const auto* r = find_record(in.records, m.transcript_id, m.message_index);
        if (!r || !r->toxicity || !r->is_toxic || !*r->is_toxic) return false;
        if (*r->toxicity < ev.threshold || *r->toxicity != m.value) return false;
      }
      return true;
    }
    case FlagKind::SentimentBiasByGroup: {
      const TestSlot slot = group_test(in.complete, in.records, "sentiment_compound", Role::Wizard, ev.dimension);
      return same_test(slot) && slot.result->p_value < ev.threshold;
    }
    case FlagKind::RoleSwitch: {
      if (flag.transcript_ids.size() != 1 || ev.messages.empty()) return false;
      for (const auto* t : in.complete) {
        if (t->transcript_id != flag.transcript_ids[0]) continue;
        const auto again = flag_role_switch(*t, ev.threshold);
        if (!again) return false;
        for (const auto& m : ev.messages)
          if (std::find(again->evidence.messages.begin(), again->evidence.messages.end(), m) ==
              again->evidence.messages.end())
            return false;
        return true;
      }
      return false;
    }
  }
  return false;
}

json BatchReport::to_json() const {
  json desc = json::array();
  for (const auto& d : descriptives)
    desc.push_back({{"metric", d.metric}, {"role", to_string(d.role)}, {"segment", d.segment},
                    {"stats", d.stats}});
  json tests_j = json::array();
  for (const auto& t : tests) tests_j.push_back(slot_json(t));
  json topics_j = json::array();
  for (const auto& t : topics) {
    json terms = json::array();
    for (const auto& tf : t.terms)
      terms.push_back({{"term", tf.term}, {"count", tf.count}, {"topic_weight", tf.topic_weight}});
    topics_j.push_back({{"dimension", t.dimension},
                        {"value", t.value},
                        {"documents", t.documents},
                        {"tokens", t.tokens},
                        {"terms", terms},
                        {"topics", t.topics.is_null() ? json::array() : t.topics},
                        {"warnings", t.warnings}});
  }
  json flags_j = json::array();
  for (const auto& f : flags) flags_j.push_back(f);
  return {{"batch_id", batch_id},       {"transcripts", transcripts}, {"complete", complete},
          {"descriptives", desc},       {"tests", tests_j},           {"topics", topics_j},
          {"flags", flags_j},           {"provenance", provenance},   {"notes", notes}};
}

std::string BatchReport::to_text() const {
  std::ostringstream o;
  o << "Batch " << batch_id << ": " << complete << " of " << transcripts
    << " transcripts complete\n\n";
  o << "Flags\n";
  if (flags.empty()) o << "  none\n";
  for (const auto& f : flags) o << "  [" << to_string(f.kind) << "] " << f.summary << "\n";

  o << "\nDescriptive statistics (" << provenance.value("report", json::object()).value("aggregation_unit", "conversation")
    << " means)\n";
  for (const auto& d : descriptives) {
    o << "  " << d.metric << " " << to_string(d.role) << " segment " << d.segment << ": M=" << fmt(d.stats.mean, 3);
    if (d.stats.sd) o << " SD=" << fmt(*d.stats.sd, 3);
    o << " n=" << d.stats.n << "\n";
  }
  std::string family;
  for (const auto& t : tests) {
    if (t.family != family) {
      family = t.family;
      o << "\nTests: " << family << "\n";
    }
    o << "  " << t.metric << " " << to_string(t.role) << " " << t.label << ": " << describe_slot(t);
    if (t.significant(0.05)) o << " *";
    o << "\n";
  }
  if (!topics.empty()) {
    o << "\nTopic terms by interlocutor group\n";
    for (const auto& t : topics) {
      o << "  " << t.dimension << "=" << t.value << " (" << t.documents << " messages): ";
      if (t.terms.empty()) {
        o << "no data\n";
        continue;
      }
      for (std::size_t i = 0; i < t.terms.size(); ++i)
        o << (i ? ", " : "") << t.terms[i].term << " " << t.terms[i].count;
      o << "\n";
    }
  }
  if (!notes.empty()) {
    o << "\nNotes\n";
    for (const auto& n : notes) o << "  " << n << "\n";
  }
  return o.str();
}

void write_report_files(const std::filesystem::path& dir, const BatchReport& r) {
  std::filesystem::create_directories(dir);
  write_file(dir / "report.json", r.to_json().dump(2) + "\n");
  write_file(dir / "report.txt", r.to_text());

  std::string d = "metric,role,segment,n,mean,sd\n";
  for (const auto& row : r.descriptives)
    d += row.metric + "," + to_string(row.role) + "," + std::to_string(row.segment) + "," +
         std::to_string(row.stats.n) + "," + csv_number(row.stats.mean) + "," +
         (row.stats.sd ? csv_number(*row.stats.sd) : "") + "\n";
  write_file(dir / "descriptives.csv", d);
  write_file(dir / "tests.csv", tests_csv(r.tests));

  std::string t = "dimension,value,rank,term,count,topic_weight\n";
  for (const auto& tab : r.topics)
    for (std::size_t i = 0; i < tab.terms.size(); ++i)
      t += csv_field(tab.dimension) + "," + csv_field(tab.value) + "," + std::to_string(i + 1) +
           "," + csv_field(tab.terms[i].term) + "," + std::to_string(tab.terms[i].count) + "," +
           csv_number(tab.terms[i].topic_weight) + "\n";
  write_file(dir / "topics.csv", t);

  std::string f = "kind,scope,transcript_id,message_index,statistic,threshold,detail\n";
  for (const auto& flag : r.flags) {
    const std::string head = std::string(to_string(flag.kind)) + "," +
                             (flag.batch_scope ? "batch" : "transcripts") + ",";
    if (flag.evidence.messages.empty())
      f += head + ",," + csv_number(flag.evidence.statistic) + "," +
           csv_number(flag.evidence.threshold) + "," + csv_field(flag.summary) + "\n";
    for (const auto& m : flag.evidence.messages)
      f += head + csv_field(m.transcript_id) + "," + std::to_string(m.message_index) + "," +
           csv_number(m.value) + "," + csv_number(flag.evidence.threshold) + "," +
           csv_field(m.detail) + "\n";
  }
  write_file(dir / "flags.csv", f);
}

ProvenanceMismatchError::ProvenanceMismatchError(std::vector<std::string> diff)
    : ConflictError([&] {
        std::string s = "batches were evaluated with different metric configurations:";
        for (const auto& d : diff) s += "\n  " + d;
        return s;
      }()),
      diff_(std::move(diff)) {}

const TestSlot* ComparisonReport::find_test(const std::string& metric, Role role) const {
  for (const auto& t : tests)
    if (t.metric == metric && t.role == role) return &t;
  return nullptr;
}

ComparisonReport compare_batches(const BatchInputs& a, const BatchInputs& b,
                                 const ReportConfig& cfg) {
  const auto diff = a.provenance.diff(b.provenance);
  if (!diff.empty()) throw ProvenanceMismatchError(diff);

  const Inputs ia = select_complete(a.transcripts, a.records);
  const Inputs ib = select_complete(b.transcripts, b.records);
  for (const auto* side : {&ia, &ib}) {
    const std::string& label = side == &ia ? a.label : b.label;
    if (side->complete.empty() || side->records.empty())
      throw ValidationError("batch '" + label + "' has no complete evaluated transcripts");
  }

  ComparisonReport rep;
  rep.a_label = a.label;
  rep.b_label = b.label;

  auto run_tests = [&](const std::vector<MetricRecord>& ra, const std::vector<MetricRecord>& rb,
                       std::vector<TestSlot>& out, std::vector<SideBySide>* desc) {
    for (const char* metric : kSeriesMetrics)
      for (Role role : {Role::Wizard, Role::Interlocutor, Role::Any}) {
        const auto ma = values_of(conversation_means(ra, metric, role));
        const auto mb = values_of(conversation_means(rb, metric, role));
        if (desc) {
          SideBySide sb{metric, role, {}, {}};
          if (!ma.empty()) sb.a = descriptive(ma);
          if (!mb.empty()) sb.b = descriptive(mb);
          desc->push_back(sb);
        }
        TestSlot slot;
        slot.family = "between_batch";
        slot.metric = metric;
        slot.role = role;
        slot.label = a.label + " vs " + b.label;
        try {
          slot.result = welch_t_test(ma, mb, a.label, b.label);
        } catch (const UndefinedMetricError& e) {
          slot.undefined_reason = e.what();
        }
        out.push_back(std::move(slot));
      }
  };
  run_tests(ia.records, ib.records, rep.tests, &rep.descriptives);

  std::map<int, std::pair<std::size_t, std::size_t>> cells;
  for (const auto* t : ia.complete) ++cells[cell_of(t->config)].first;
  for (const auto* t : ib.complete) ++cells[cell_of(t->config)].second;
  std::set<int> shared;
  bool partial = false;
  for (const auto& [cell, counts] : cells) {
    if (cell >= 0 && counts.first > 0 && counts.second > 0) {
      shared.insert(cell);
      rep.matched_cells.push_back({cell, counts.first, counts.second});
    } else {
      partial = true;
    }
  }
  if (!shared.empty() && partial) {
    auto restrict = [&](const Inputs& in) {
      std::set<std::string> keep;
      for (const auto* t : in.complete)
        if (shared.count(cell_of(t->config))) keep.insert(t->transcript_id);
      std::vector<MetricRecord> out;
      for (const auto& r : in.records)
        if (keep.count(r.transcript_id)) out.push_back(r);
      return out;
    };
    run_tests(restrict(ia), restrict(ib), rep.matched_tests, nullptr);
    for (auto& t : rep.matched_tests) t.family = "between_batch_matched";
  }

  rep.a_terms = wizard_terms(ia.complete, cfg.lda, cfg.top_terms);
  rep.b_terms = wizard_terms(ib.complete, cfg.lda, cfg.top_terms);
  if (!rep.a_terms.empty() && !rep.b_terms.empty()) {
    std::set<std::string> sa(rep.a_terms.begin(), rep.a_terms.end());
    std::set<std::string> sb(rep.b_terms.begin(), rep.b_terms.end());
    std::size_t inter = 0;
    for (const auto& t : sa) inter += sb.count(t);
    rep.term_overlap = static_cast<double>(inter) / static_cast<double>(sa.size() + sb.size() - inter);
  } else {
    rep.notes.push_back("topic-term overlap undefined: a batch has no wizard terms");
  }

  rep.provenance = {{"metrics", a.provenance.to_json()}, {"report", cfg.to_json()},
                    {"a_transcripts", ia.complete.size()}, {"b_transcripts", ib.complete.size()}};
  return rep;
}

json ComparisonReport::to_json() const {
  json desc = json::array();
  for (const auto& d : descriptives)
    desc.push_back({{"metric", d.metric},
                    {"role", to_string(d.role)},
                    {"a", d.a ? json(*d.a) : json(nullptr)},
                    {"b", d.b ? json(*d.b) : json(nullptr)}});
  json tests_j = json::array();
  for (const auto& t : tests) tests_j.push_back(slot_json(t));
  json matched_j = json::array();
  for (const auto& t : matched_tests) matched_j.push_back(slot_json(t));
  json cells_j = json::array();
  for (const auto& c : matched_cells)
    cells_j.push_back({{"combination", c.combination},
                       {"label", cell_label(c.combination)},
                       {"a", c.a_count},
                       {"b", c.b_count}});
  return {{"a", a_label},
          {"b", b_label},
          {"descriptives", desc},
          {"tests", tests_j},
          {"matched_cells", cells_j},
          {"matched_tests", matched_j},
          {"topic_terms", {{"a", a_terms}, {"b", b_terms}}},
          {"term_overlap", term_overlap ? json(*term_overlap) : json(nullptr)},
          {"provenance", provenance},
          {"notes", notes}};
}

std::string ComparisonReport::to_text() const {
  std::ostringstream o;
  o << "Comparison " << a_label << " vs " << b_label << "\n\n";
  for (const auto& d : descriptives) {
    o << "  " << d.metric << " " << to_string(d.role) << ": ";
    for (const auto* side : {&d.a, &d.b}) {
      o << (side == &d.a ? a_label : "  " + b_label) << " ";
      if (!*side) {
        o << "n/a";
        continue;
      }
      o << "M=" << fmt((*side)->mean, 3);
      if ((*side)->sd) o << " SD=" << fmt(*(*side)->sd, 3);
      o << " n=" << (*side)->n;
    }
    o << "\n";
  }
  o << "\nBetween-batch tests\n";
  for (const auto& t : tests) {
    o << "  " << t.metric << " " << to_string(t.role) << ": " << describe_slot(t);
    if (t.significant(0.05)) o << " *";
    o << "\n";
  }
  if (!matched_tests.empty()) {
    o << "\nTests on shared factor cells (" << matched_cells.size() << " cells)\n";
    for (const auto& t : matched_tests)
      o << "  " << t.metric << " " << to_string(t.role) << ": " << describe_slot(t) << "\n";
  }
  o << "\nTop wizard terms overlap: "
    << (term_overlap ? fmt(*term_overlap, 3) : std::string("undefined")) << "\n";
  for (const auto& n : notes) o << "  " << n << "\n";
  return o.str();
}

void write_comparison_files(const std::filesystem::path& dir, const ComparisonReport& r) {
  std::filesystem::create_directories(dir);
  write_file(dir / "comparison.json", r.to_json().dump(2) + "\n");
  write_file(dir / "comparison.txt", r.to_text());
  auto tests = r.tests;
  tests.insert(tests.end(), r.matched_tests.begin(), r.matched_tests.end());
  write_file(dir / "tests.csv", tests_csv(tests));
  std::string d = "metric,role,a_n,a_mean,a_sd,b_n,b_mean,b_sd\n";
  for (const auto& row : r.descriptives) {
    d += row.metric + "," + to_string(row.role);
    for (const auto* side : {&row.a, &row.b}) {
      if (!*side) {
        d += ",,,";
        continue;
      }
      d += "," + std::to_string((*side)->n) + "," + csv_number((*side)->mean) + "," +
           ((*side)->sd ? csv_number(*(*side)->sd) : "");
    }
    d += "\n";
  }
  write_file(dir / "descriptives.csv", d);
}

void write_review_export(const std::filesystem::path& dir,
                         const std::vector<ConversationTranscript>& transcripts) {
  std::filesystem::create_directories(dir);
  std::string index = "transcript_id,file,stage,status,combination,messages,pushy,lacks_empathy,notes\n";
  std::set<std::string> used;
  for (const auto& t : transcripts) {
    std::string file = safe_file_name(t.transcript_id);
    for (int k = 2; used.count(file + ".txt"); ++k) file = safe_file_name(t.transcript_id) + "-" + std::to_string(k);
    file += ".txt";
    used.insert(file);

    const auto& c = t.config;
    const std::string wizard = c.wizard_persona.display_name.empty() ? "Wizard" : c.wizard_persona.display_name;
    std::string other = c.simulacrum_persona.display_name;
    if (other.empty()) other = t.stage == Stage::Human ? "Participant" : "Simulacrum";

    std::ostringstream o;
    o << "Transcript: " << t.transcript_id << "\n";
    o << "Stage: " << to_string(t.stage) << "\n";
    o << "Status: " << (t.complete() ? "complete" : "failed");
    if (!t.complete()) o << " (" << t.failure_reason << ")";
    o << "\n";
    const int cell = cell_of(c);
    o << "Condition: " << cell_label(cell) << "\n";
    if (c.topic_goal) o << "Topic: " << c.topic_goal->topic << "\n";
    o << "Wizard " << wizard << ": " << persona_line(c.wizard_persona) << "\n";
    o << "Interlocutor " << other << ": " << persona_line(c.simulacrum_persona) << "\n\n";
    for (std::size_t i = 0; i < t.messages.size(); ++i) {
      const auto& m = t.messages[i];
      o << "[" << i << "] " << (is_wizard(m.speaker) ? wizard : other) << " (" << to_string(m.speaker)
        << ", turn " << m.turn_index << "):\n" << m.text << "\n\n";
    }
    o << "Reviewer notes:\n";
    write_file(dir / file, o.str());

    index += csv_field(t.transcript_id) + "," + csv_field(file) + "," + to_string(t.stage) + "," +
             (t.complete() ? "complete" : "failed") + "," + std::to_string(cell) + "," +
             std::to_string(t.messages.size()) + ",,,\n";
  }
  write_file(dir / "index.csv", index);
}

}  // namespace wozlab
