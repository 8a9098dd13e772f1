#include "wozlab/metrics.hpp"

#include <algorithm>
#include <fstream>

#include "wozlab/error.hpp"
#include "wozlab/segments.hpp"
#include "wozlab/sentiment.hpp"
#include "wozlab/similarity.hpp"

namespace wozlab {

using nlohmann::json;

namespace {

const std::vector<std::string> kNames = {
    "toxicity",         "is_toxic",           "sentiment_compound", "readability_raw",
    "readability_norm", "sem_sim_prev_own",   "sem_sim_prev_other", "lcs_sim_prev_own",
    "lcs_sim_prev_other"};

json opt(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

std::optional<double> get_opt(const json& j, const char* key) {
  if (!j.contains(key) || j.at(key).is_null()) return std::nullopt;
  return j.at(key).get<double>();
}

}  // namespace

const std::vector<std::string>& metric_names() { return kNames; }

bool is_metric_name(std::string_view name) {
  return std::find(kNames.begin(), kNames.end(), name) != kNames.end();
}

std::optional<double> MetricRecord::value(std::string_view m) const {
  if (m == "toxicity") return toxicity;
  if (m == "is_toxic") return is_toxic ? std::optional<double>(*is_toxic ? 1.0 : 0.0) : std::nullopt;
  if (m == "sentiment_compound") return sentiment_compound;
  if (m == "readability_raw") return readability_raw;
  if (m == "readability_norm") return readability_norm;
  if (m == "sem_sim_prev_own") return sem_sim_prev_own;
  if (m == "sem_sim_prev_other") return sem_sim_prev_other;
  if (m == "lcs_sim_prev_own") return lcs_sim_prev_own;
  if (m == "lcs_sim_prev_other") return lcs_sim_prev_other;
  throw ValidationError("unknown metric '" + std::string(m) + "'");
}

void to_json(json& j, const MetricRecord& r) {
  j = {{"transcript_id", r.transcript_id},
       {"message_index", r.message_index},
       {"speaker", to_string(r.speaker)},
       {"turn_index", r.turn_index},
       {"segment", r.segment},
       {"toxicity", opt(r.toxicity)},
       {"is_toxic", r.is_toxic ? json(*r.is_toxic) : json(nullptr)},
       {"sentiment_compound", opt(r.sentiment_compound)},
       {"readability_raw", opt(r.readability_raw)},
       {"readability_norm", opt(r.readability_norm)},
       {"sem_sim_prev_own", opt(r.sem_sim_prev_own)},
       {"sem_sim_prev_other", opt(r.sem_sim_prev_other)},
       {"lcs_sim_prev_own", opt(r.lcs_sim_prev_own)},
       {"lcs_sim_prev_other", opt(r.lcs_sim_prev_other)},
       {"missing", r.missing}};
}

void from_json(const json& j, MetricRecord& r) {
  r.transcript_id = j.at("transcript_id").get<std::string>();
  r.message_index = j.at("message_index").get<std::size_t>();
  r.speaker = speaker_from_string(j.at("speaker").get<std::string>());
  r.turn_index = j.at("turn_index").get<int>();
  r.segment = j.at("segment").get<int>();
  r.toxicity = get_opt(j, "toxicity");
  r.is_toxic = j.contains("is_toxic") && !j.at("is_toxic").is_null()
                   ? std::optional<bool>(j.at("is_toxic").get<bool>())
                   : std::nullopt;
  r.sentiment_compound = get_opt(j, "sentiment_compound");
  r.readability_raw = get_opt(j, "readability_raw");
  r.readability_norm = get_opt(j, "readability_norm");
  r.sem_sim_prev_own = get_opt(j, "sem_sim_prev_own");
  r.sem_sim_prev_other = get_opt(j, "sem_sim_prev_other");
  r.lcs_sim_prev_own = get_opt(j, "lcs_sim_prev_own");
  r.lcs_sim_prev_other = get_opt(j, "lcs_sim_prev_other");
  r.missing = j.value("missing", std::map<std::string, std::string>{});
}

std::vector<MessageSimilarity> message_similarities(const ConversationTranscript& t,
                                                    EmbeddingGateway* embeddings) {
  const auto& msgs = t.messages;
  std::vector<MessageSimilarity> out(msgs.size());

  std::vector<Embedding> vecs;
  std::string embed_error;
  if (embeddings == nullptr) {
    embed_error = "no embedding provider configured";
  } else if (!msgs.empty()) {
    std::vector<std::string> texts;
    texts.reserve(msgs.size());
    for (const auto& m : msgs) texts.push_back(m.text);
    try {
      vecs = embeddings->embed_batch(texts);
    } catch (const Error& e) {
      embed_error = std::string("embedding failed: ") + e.what();
    }
  }

  auto semantic = [&](MessageSimilarity& s, std::size_t i, std::size_t j,
                      std::optional<double>& field, const char* name) {
    if (!embed_error.empty()) {
      s.missing[name] = embed_error;
      return;
    }
    try {
      field = std::max(0.0, cosine_similarity(vecs[i], vecs[j]));
    } catch (const Error& e) {
      s.missing[name] = e.what();
    }
  };

  for (std::size_t i = 0; i < msgs.size(); ++i) {
    auto& s = out[i];
    if (i >= 1) {
      s.lcs_prev_other = lcsseq_similarity(msgs[i].text, msgs[i - 1].text);
      semantic(s, i, i - 1, s.sem_prev_other, "sem_sim_prev_other");
    }
    if (i >= 2) {
      s.lcs_prev_own = lcsseq_similarity(msgs[i].text, msgs[i - 2].text);
      semantic(s, i, i - 2, s.sem_prev_own, "sem_sim_prev_own");
    }
  }
  return out;
}

json MetricProvenance::to_json() const {
  return {{"sentiment_lexicon", sentiment_lexicon}, {"readability", readability},
          {"embedding_provider", embedding_provider}, {"embedding_model", embedding_model},
          {"toxicity_provider", toxicity_provider},   {"toxicity_model", toxicity_model},
          {"toxicity_threshold", toxicity_threshold}};
}

MetricProvenance MetricProvenance::from_json(const json& j) {
  MetricProvenance p;
  p.sentiment_lexicon = j.at("sentiment_lexicon").get<std::string>();
  p.readability = j.at("readability").get<std::string>();
  p.embedding_provider = j.at("embedding_provider").get<std::string>();
  p.embedding_model = j.at("embedding_model").get<std::string>();
  p.toxicity_provider = j.at("toxicity_provider").get<std::string>();
  p.toxicity_model = j.at("toxicity_model").get<std::string>();
  p.toxicity_threshold = j.at("toxicity_threshold").get<double>();
  return p;
}

std::vector<std::string> MetricProvenance::diff(const MetricProvenance& o) const {
  std::vector<std::string> d;
  auto cmp = [&](const char* name, const std::string& a, const std::string& b) {
    if (a != b) d.push_back(std::string(name) + ": " + a + " != " + b);
  };
  cmp("sentiment_lexicon", sentiment_lexicon, o.sentiment_lexicon);
  cmp("readability", readability, o.readability);
  cmp("embedding_provider", embedding_provider, o.embedding_provider);
  cmp("embedding_model", embedding_model, o.embedding_model);
  cmp("toxicity_provider", toxicity_provider, o.toxicity_provider);
  cmp("toxicity_model", toxicity_model, o.toxicity_model);
  if (toxicity_threshold != o.toxicity_threshold)
    d.push_back("toxicity_threshold: " + std::to_string(toxicity_threshold) +
                " != " + std::to_string(o.toxicity_threshold));
  return d;
}

Evaluator::Evaluator(EmbeddingGateway* embeddings, ToxicityGateway* toxicity, MetricConfig cfg)
    : embeddings_(embeddings), toxicity_(toxicity), cfg_(cfg) {
  if (!(cfg_.toxicity_threshold >= 0.0 && cfg_.toxicity_threshold <= 1.0))
    throw ConfigError("toxicity threshold must lie in [0, 1]");
}

MetricProvenance Evaluator::provenance() const {
  MetricProvenance p;
  p.sentiment_lexicon = SentimentAnalyzer::shared().lexicon_version();
  p.readability = cfg_.readability.label();
  p.embedding_provider = embeddings_ ? embeddings_->provider_id() : "none";
  p.embedding_model = embeddings_ ? embeddings_->model_id() : "none";
  p.toxicity_provider = toxicity_ ? toxicity_->provider_id() : "none";
  p.toxicity_model = toxicity_ ? toxicity_->model_id() : "none";
  p.toxicity_threshold = cfg_.toxicity_threshold;
  return p;
}

namespace {

void score_text(MetricRecord& r, const std::string& text, ToxicityGateway* toxicity,
                const MetricConfig& cfg) {
  if (toxicity == nullptr) {
    r.missing["toxicity"] = "no toxicity provider configured";
  } else {
    try {
      const double s = toxicity->score_toxicity(text);
      r.toxicity = s;
      r.is_toxic = s >= cfg.toxicity_threshold;
    } catch (const Error& e) {
      r.missing["toxicity"] = std::string("toxicity scoring failed: ") + e.what();
    }
  }
  r.sentiment_compound = sentiment_compound(text);
  try {
    const double raw = flesch_reading_ease(text, cfg.readability.syllables);
    r.readability_raw = raw;
    r.readability_norm = normalize_readability(raw, cfg.readability.scale);
  } catch (const UndefinedMetricError& e) {
    r.missing["readability"] = e.what();
  }
}

}  // namespace

MetricRecord Evaluator::evaluate_message(const ConversationTranscript& t,
                                         std::size_t index) const {
  if (index >= t.messages.size()) throw ValidationError("message index out of range");
  auto records = evaluate_transcript(t);
  return records[index];
}

std::vector<MetricRecord> Evaluator::evaluate_transcript(const ConversationTranscript& t) const {
  std::vector<MetricRecord> out;
  out.reserve(t.messages.size());
  if (t.messages.empty()) return out;
  const auto sims = message_similarities(t, embeddings_);
  for (std::size_t i = 0; i < t.messages.size(); ++i) {
    const auto& m = t.messages[i];
    MetricRecord r;
    r.transcript_id = t.transcript_id;
    r.message_index = i;
    r.speaker = m.speaker;
    r.turn_index = m.turn_index;
    r.segment = segment_for_turn(m.turn_index);
    score_text(r, m.text, toxicity_, cfg_);
    r.sem_sim_prev_own = sims[i].sem_prev_own;
    r.sem_sim_prev_other = sims[i].sem_prev_other;
    r.lcs_sim_prev_own = sims[i].lcs_prev_own;
    r.lcs_sim_prev_other = sims[i].lcs_prev_other;
    for (const auto& [k, v] : sims[i].missing) r.missing[k] = v;
    out.push_back(std::move(r));
  }
  return out;
}

void write_metrics(const std::filesystem::path& path, const std::vector<MetricRecord>& records) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw ConfigError("cannot write metrics file " + path.string());
  for (const auto& r : records) out << json(r).dump() << '\n';
}

std::vector<MetricRecord> read_metrics(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw NotFoundError("cannot open metrics file " + path.string());
  std::vector<MetricRecord> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      out.push_back(json::parse(line).get<MetricRecord>());
    } catch (const std::exception& e) {
      throw IntegrityError("metrics line " + std::to_string(lineno) + ": " + e.what());
    }
  }
  return out;
}

}  // namespace wozlab
