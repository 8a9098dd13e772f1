#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace wozlab {

struct PolarityScores {
  double negative = 0.0;
  double neutral = 0.0;
  double positive = 0.0;
  double compound = 0.0;  // in [-1, 1]
};

/// Rule-based valence analyzer over a word-valence lexicon (VADER 3.3.2
/// lexicon format: token TAB mean TAB sd TAB ratings). Applies booster and
/// dampener words, negation, capitalization and punctuation emphasis, and
/// contrastive "but" weighting, then alpha-normalizes the valence sum.
class SentimentAnalyzer {
 public:
  /// Throws ConfigError if either file is missing or malformed.
  SentimentAnalyzer(const std::filesystem::path& lexicon_file,
                    const std::filesystem::path& emoji_file);

  /// Analyzer over the shipped lexicon files, loaded once.
  static const SentimentAnalyzer& shared();

  PolarityScores polarity_scores(std::string_view text) const;
  double compound(std::string_view text) const { return polarity_scores(text).compound; }

  /// Identifies the loaded lexicon content, for provenance records.
  const std::string& lexicon_version() const { return version_; }
  std::size_t lexicon_size() const { return lexicon_.size(); }
  /// Valence of a lowercase token, or 0 when absent.
  double valence_of(const std::string& token) const;

 private:
  double word_valence(const std::vector<std::string>& words,
                      const std::vector<std::string>& lower, std::size_t i,
                      bool cap_diff) const;
  bool in_lexicon(const std::string& lower) const { return lexicon_.count(lower) != 0; }

  std::unordered_map<std::string, double> lexicon_;
  std::unordered_map<char32_t, std::string> emojis_;
  std::string version_;
};

/// Compound score of `text` under the shared analyzer.
double sentiment_compound(std::string_view text);

}  // namespace wozlab
