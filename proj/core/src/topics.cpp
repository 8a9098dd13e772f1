#include "wozlab/topics.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>

#include "wozlab/data_files.hpp"
#include "wozlab/error.hpp"

namespace wozlab {

StopwordSet StopwordSet::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read stopword list " + path.string());
  std::unordered_set<std::string> words;
  std::string line;
  while (std::getline(in, line)) {
    if (auto h = line.find('#'); h != std::string::npos) line.resize(h);
    while (!line.empty() && std::isspace(static_cast<unsigned char>(line.back()))) line.pop_back();
    std::size_t b = 0;
    while (b < line.size() && std::isspace(static_cast<unsigned char>(line[b]))) ++b;
    if (b < line.size()) words.insert(line.substr(b));
  }
  return StopwordSet(std::move(words));
}

const StopwordSet& StopwordSet::english() {
  static const StopwordSet s = load(data_file("stopwords_en.txt"));
  return s;
}

Corpus Corpus::from_tokens(const std::vector<std::vector<std::string>>& docs) {
  Corpus c;
  for (const auto& d : docs) {
    if (d.empty()) continue;
    std::vector<int> ids;
    ids.reserve(d.size());
    for (const auto& tok : d) {
      auto [it, inserted] = c.index.try_emplace(tok, static_cast<int>(c.vocabulary.size()));
      if (inserted) c.vocabulary.push_back(tok);
      ids.push_back(it->second);
    }
    c.documents.push_back(std::move(ids));
  }
  return c;
}

std::size_t Corpus::token_count() const {
  std::size_t n = 0;
  for (const auto& d : documents) n += d.size();
  return n;
}

std::vector<std::size_t> Corpus::term_counts() const {
  std::vector<std::size_t> counts(vocabulary.size(), 0);
  for (const auto& d : documents)
    for (int w : d) ++counts[static_cast<std::size_t>(w)];
  return counts;
}

std::vector<std::string> tokenize(std::string_view text, const StopwordSet& stopwords) {
  std::vector<std::string> out;
  std::string cur;
  auto flush = [&] {
    if (cur.size() > 1 && !stopwords.contains(cur)) out.push_back(cur);
    cur.clear();
  };
  for (char ch : text) {
    const auto u = static_cast<unsigned char>(ch);
    if (std::isspace(u)) {
      flush();
    } else if (u < 0x80 && std::ispunct(u)) {
      continue;
    } else {
      cur.push_back(static_cast<char>(u < 0x80 ? std::tolower(u) : u));
    }
  }
  flush();
  return out;
}

Corpus preprocess(const std::vector<std::string>& texts, const StopwordSet& stopwords) {
  std::vector<std::vector<std::string>> docs;
  docs.reserve(texts.size());
  for (const auto& t : texts) docs.push_back(tokenize(t, stopwords));
  return Corpus::from_tokens(docs);
}

Corpus group_corpora(const std::vector<ConversationTranscript>& transcripts,
                     const std::string& dimension, const std::string& value,
                     const DimensionSet& dims, Speaker speaker, const StopwordSet& stopwords) {
  const auto& dim = dims.at(dimension);  // ValidationError when unknown
  if (!dim.contains(value))
    throw ValidationError("'" + value + "' is not an option of dimension '" + dimension + "'");
  std::vector<std::string> texts;
  std::size_t matched = 0;
  for (const auto& t : transcripts) {
    if (t.stage == Stage::Simulated && !t.config.simulacrum_demo_disclosure) continue;
    if (t.config.simulacrum_persona.value(dimension) != value) continue;
    ++matched;
    for (const auto& m : t.messages)
      if (m.speaker == speaker) texts.push_back(m.text);
  }
  Corpus c = preprocess(texts, stopwords);
  c.group_label = dimension + "=" + value;
  if (matched == 0)
    c.warnings.push_back("no transcripts match " + *c.group_label);
  else if (c.empty())
    c.warnings.push_back("matching transcripts for " + *c.group_label +
                         " have no tokens after preprocessing");
  return c;
}

GibbsSampler::GibbsSampler(const Corpus& corpus, int topics, double alpha, double beta,
                           std::uint64_t seed)
    : corpus_(corpus),
      K_(static_cast<std::size_t>(topics)),
      V_(corpus.vocabulary.size()),
      D_(corpus.documents.size()),
      alpha_(alpha),
      beta_(beta),
      rng_(seed),
      n_dk_(D_ * K_, 0),
      n_kw_(K_ * V_, 0),
      n_k_(K_, 0),
      p_(K_, 0.0) {
  z_.resize(D_);
  for (std::size_t d = 0; d < D_; ++d) {
    const auto& doc = corpus.documents[d];
    z_[d].resize(doc.size());
    for (std::size_t i = 0; i < doc.size(); ++i) {
      const auto k = static_cast<std::size_t>(rng_.below(K_));
      const auto w = static_cast<std::size_t>(doc[i]);
      z_[d][i] = static_cast<int>(k);
      ++n_dk_[d * K_ + k];
      ++n_kw_[k * V_ + w];
      ++n_k_[k];
    }
  }
}

void GibbsSampler::sweep() {
  const double vbeta = static_cast<double>(V_) * beta_;
  for (std::size_t d = 0; d < D_; ++d) {
    const auto& doc = corpus_.documents[d];
    for (std::size_t i = 0; i < doc.size(); ++i) {
      const auto w = static_cast<std::size_t>(doc[i]);
      auto k = static_cast<std::size_t>(z_[d][i]);
      --n_dk_[d * K_ + k];
      --n_kw_[k * V_ + w];
      --n_k_[k];
      double total = 0.0;
      for (std::size_t t = 0; t < K_; ++t) {
        total += (static_cast<double>(n_dk_[d * K_ + t]) + alpha_) *
                 (static_cast<double>(n_kw_[t * V_ + w]) + beta_) /
                 (static_cast<double>(n_k_[t]) + vbeta);
        p_[t] = total;
      }
      const double u = rng_.uniform() * total;
      k = 0;
      while (k + 1 < K_ && u >= p_[k]) ++k;
      z_[d][i] = static_cast<int>(k);
      ++n_dk_[d * K_ + k];
      ++n_kw_[k * V_ + w];
      ++n_k_[k];
    }
  }
}

std::size_t GibbsSampler::total_assigned() const {
  std::size_t n = 0;
  for (auto c : n_k_) n += c;
  return n;
}

TopicModel GibbsSampler::estimate(int iterations_done, std::uint64_t seed) const {
  TopicModel m;
  m.topics = static_cast<int>(K_);
  m.alpha = alpha_;
  m.beta = beta_;
  m.iterations = iterations_done;
  m.seed = seed;
  m.vocabulary = corpus_.vocabulary;
  const double vbeta = static_cast<double>(V_) * beta_;
  m.phi.assign(K_, std::vector<double>(V_, 0.0));
  m.topic_term_counts.assign(K_, std::vector<std::size_t>(V_, 0));
  for (std::size_t k = 0; k < K_; ++k) {
    for (std::size_t w = 0; w < V_; ++w) {
      m.topic_term_counts[k][w] = n_kw_[k * V_ + w];
      m.phi[k][w] = (static_cast<double>(n_kw_[k * V_ + w]) + beta_) /
                    (static_cast<double>(n_k_[k]) + vbeta);
    }
  }
  const double kalpha = static_cast<double>(K_) * alpha_;
  m.theta.assign(D_, std::vector<double>(K_, 0.0));
  for (std::size_t d = 0; d < D_; ++d) {
    const double nd = static_cast<double>(corpus_.documents[d].size());
    for (std::size_t k = 0; k < K_; ++k)
      m.theta[d][k] = (static_cast<double>(n_dk_[d * K_ + k]) + alpha_) / (nd + kalpha);
  }
  return m;
}

TopicModel fit_lda(const Corpus& corpus, const LdaParams& params) {
  if (corpus.empty()) throw ValidationError("cannot fit a topic model to an empty corpus");
  if (params.topics < 1) throw ValidationError("topic count must be at least 1");
  const double alpha = params.resolved_alpha();
  if (!(alpha > 0.0) || !(params.beta > 0.0))
    throw ValidationError("alpha and beta must be positive");
  if (params.iterations < 0) throw ValidationError("iterations must be non-negative");
  GibbsSampler s(corpus, params.topics, alpha, params.beta, params.seed);
  for (int it = 0; it < params.iterations; ++it) s.sweep();
  return s.estimate(params.iterations, params.seed);
}

nlohmann::json TopicModel::to_json(std::size_t terms_per_topic) const {
  nlohmann::json topics_j = nlohmann::json::array();
  for (int k = 0; k < topics; ++k) {
    const auto& row = phi[static_cast<std::size_t>(k)];
    std::vector<std::size_t> order(row.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
      if (row[a] != row[b]) return row[a] > row[b];
      return vocabulary[a] < vocabulary[b];
    });
    nlohmann::json terms = nlohmann::json::array();
    for (std::size_t i = 0; i < std::min(terms_per_topic, order.size()); ++i)
      terms.push_back({{"term", vocabulary[order[i]]}, {"weight", row[order[i]]}});
    topics_j.push_back({{"topic", k}, {"terms", terms}});
  }
  return {{"topics", topics},         {"alpha", alpha}, {"beta", beta},
          {"iterations", iterations}, {"seed", seed},   {"topic_terms", topics_j}};
}

std::vector<TermFrequency> top_terms(const Corpus& corpus, const TopicModel& model,
                                     std::size_t n) {
  if (model.vocabulary != corpus.vocabulary)
    throw ValidationError("topic model was not fitted on this corpus");
  const auto counts = corpus.term_counts();
  const std::size_t K = static_cast<std::size_t>(model.topics);
  std::vector<double> topic_share(K, 0.0);
  double total = 0.0;
  for (std::size_t k = 0; k < K; ++k) {
    for (auto c : model.topic_term_counts[k]) topic_share[k] += static_cast<double>(c);
    total += topic_share[k];
  }
  std::vector<TermFrequency> terms;
  for (std::size_t w = 0; w < corpus.vocabulary.size(); ++w) {
    bool supported = false;
    double weight = 0.0;
    for (std::size_t k = 0; k < K; ++k) {
      supported = supported || model.topic_term_counts[k][w] > 0;
      weight += (total > 0 ? topic_share[k] / total : 0.0) * model.phi[k][w];
    }
    if (supported) terms.push_back({corpus.vocabulary[w], counts[w], weight});
  }
  std::sort(terms.begin(), terms.end(), [](const TermFrequency& a, const TermFrequency& b) {
    if (a.count != b.count) return a.count > b.count;
    return a.term < b.term;
  });
  if (terms.size() > n) terms.resize(n);
  return terms;
}

}  // namespace wozlab
