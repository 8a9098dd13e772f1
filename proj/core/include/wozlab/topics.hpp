#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include <nlohmann/json.hpp>

#include "wozlab/persona.hpp"
#include "wozlab/random.hpp"
#include "wozlab/transcript.hpp"

namespace wozlab {

class StopwordSet {
 public:
  StopwordSet() = default;
  explicit StopwordSet(std::unordered_set<std::string> words) : words_(std::move(words)) {}
  /// One word per line; '#' starts a comment. Throws ConfigError.
  static StopwordSet load(const std::filesystem::path& path);
  /// The shipped English list (data/stopwords_en.txt).
  static const StopwordSet& english();

  bool contains(const std::string& w) const { return words_.count(w) != 0; }
  std::size_t size() const { return words_.size(); }

 private:
  std::unordered_set<std::string> words_;
};

struct Corpus {
  std::vector<std::vector<int>> documents;  // token ids
  std::vector<std::string> vocabulary;      // id -> token
  std::unordered_map<std::string, int> index;
  std::optional<std::string> group_label;
  std::vector<std::string> warnings;

  /// Builds from token lists as given; empty documents are dropped.
  static Corpus from_tokens(const std::vector<std::vector<std::string>>& docs);

  std::size_t token_count() const;
  bool empty() const { return documents.empty(); }
  /// Raw count of every vocabulary entry.
  std::vector<std::size_t> term_counts() const;
};

/// Lowercase, strip punctuation, split on whitespace, drop stopwords and
/// one-character tokens. Documents left empty are not kept.
std::vector<std::string> tokenize(std::string_view text, const StopwordSet& stopwords);
Corpus preprocess(const std::vector<std::string>& texts,
                  const StopwordSet& stopwords = StopwordSet::english());

/// Messages of `speaker` from conversations whose interlocutor has
/// persona value `value` on `dimension`. Simulated transcripts count only
/// when the simulacrum was told to disclose its demographics; human
/// transcripts always count (participants self-report in the survey).
/// Throws ValidationError for an unknown dimension or value.
Corpus group_corpora(const std::vector<ConversationTranscript>& transcripts,
                     const std::string& dimension, const std::string& value,
                     const DimensionSet& dims, Speaker speaker = Speaker::Wizard,
                     const StopwordSet& stopwords = StopwordSet::english());

struct LdaParams {
  int topics = 5;
  std::optional<double> alpha;  // default 50 / topics
  double beta = 0.01;
  int iterations = 1000;
  std::uint64_t seed = 1;

  double resolved_alpha() const { return alpha ? *alpha : 50.0 / topics; }
};

struct TopicModel {
  int topics = 0;
  double alpha = 0.0;
  double beta = 0.0;
  int iterations = 0;
  std::uint64_t seed = 0;
  std::vector<std::vector<double>> phi;    // topics x vocabulary
  std::vector<std::vector<double>> theta;  // documents x topics
  std::vector<std::vector<std::size_t>> topic_term_counts;  // final assignments
  std::vector<std::string> vocabulary;

  nlohmann::json to_json(std::size_t terms_per_topic = 10) const;
};

/// Collapsed Gibbs sampler over a fixed corpus. Exposes its count
/// matrices so callers can check invariants between sweeps.
class GibbsSampler {
 public:
  GibbsSampler(const Corpus& corpus, int topics, double alpha, double beta, std::uint64_t seed);

  /// One pass resampling every token's topic.
  void sweep();
  TopicModel estimate(int iterations_done, std::uint64_t seed) const;

  std::size_t total_assigned() const;
  const std::vector<std::size_t>& topic_totals() const { return n_k_; }
  std::size_t doc_topic(std::size_t d, int k) const { return n_dk_[d * K_ + static_cast<std::size_t>(k)]; }
  std::size_t topic_term(int k, std::size_t w) const { return n_kw_[static_cast<std::size_t>(k) * V_ + w]; }
  const std::vector<std::vector<int>>& assignments() const { return z_; }

 private:
  const Corpus& corpus_;
  std::size_t K_, V_, D_;
  double alpha_, beta_;
  Rng rng_;
  std::vector<std::vector<int>> z_;
  std::vector<std::size_t> n_dk_, n_kw_, n_k_;
  std::vector<double> p_;
};

/// Throws ValidationError on an empty corpus, topics < 1, non-positive
/// hyperparameters or negative iterations.
TopicModel fit_lda(const Corpus& corpus, const LdaParams& params);

struct TermFrequency {
  std::string term;
  std::size_t count = 0;
  double topic_weight = 0.0;  // sum over topics of p(topic) * phi(topic, term)

  bool operator==(const TermFrequency&) const = default;
};

/// Corpus term frequencies for terms the model assigned tokens to, ranked
/// by count then lexicographically. n larger than the vocabulary returns
/// every term.
std::vector<TermFrequency> top_terms(const Corpus& corpus, const TopicModel& model,
                                     std::size_t n = 15);

}  // namespace wozlab
