#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace wozlab {

enum class SyllableRule {
  VowelGroups,  // dictionary-free heuristic
  Hyphenation,  // hyphenation points + 1, en_US patterns
};

const char* to_string(SyllableRule r);
SyllableRule syllable_rule_from_string(std::string_view s);

/// Liang-style hyphenation patterns in the hyph_*.dic text format.
class HyphenationPatterns {
 public:
  /// Throws ConfigError if the file cannot be read or holds no patterns.
  explicit HyphenationPatterns(const std::filesystem::path& file, int left_min = 2,
                               int right_min = 2);

  /// The shipped en_US patterns.
  static const HyphenationPatterns& shared();

  /// Code point offsets where `word` may be broken, excluding breaks that
  /// leave fewer than left_min / right_min characters.
  std::vector<std::size_t> positions(std::u32string_view lowercase_word) const;

 private:
  std::unordered_map<std::u32string, std::vector<unsigned char>> patterns_;
  std::size_t max_len_ = 0;
  int left_min_;
  int right_min_;
};

/// Syllable estimate for one word from vowel groups, with silent-e,
/// inflection and vowel-hiatus adjustments. Returns at least 1 for any
/// word containing a letter or digit, 0 otherwise.
int count_syllables(std::string_view word, SyllableRule rule = SyllableRule::VowelGroups);

struct TextCounts {
  int words = 0;
  int sentences = 0;
  int syllables = 0;
};

/// Words are whitespace tokens containing a letter or digit. Sentences are
/// runs ending in terminal punctuation (. ! ?); fragments of two words or
/// fewer (e.g. "Hear, hear!") are not counted, with a floor of one.
TextCounts count_text(std::string_view text, SyllableRule rule = SyllableRule::VowelGroups);

/// 206.835 - 1.015 * words/sentences - 84.6 * syllables/words.
/// Throws UndefinedMetricError when the text has no words.
double flesch_reading_ease(std::string_view text,
                           SyllableRule rule = SyllableRule::VowelGroups);

/// Highest attainable reading-ease score: one single-syllable word.
inline constexpr double kFleschCeiling = 206.835 - 1.015 - 84.6;

enum class ReadabilityScale {
  Percent,        // clamp(raw, 0, 100) / 100
  FleschCeiling,  // clamp(raw, 0, ceiling) / ceiling
};

const char* to_string(ReadabilityScale s);
ReadabilityScale readability_scale_from_string(std::string_view s);

double normalize_readability(double raw, ReadabilityScale scale = ReadabilityScale::Percent);

struct ReadabilityConfig {
  SyllableRule syllables = SyllableRule::VowelGroups;
  ReadabilityScale scale = ReadabilityScale::Percent;

  /// Hyphenation-based syllables on the ceiling scale. This is the
  /// convention of common text-statistics packages and the calibration used
  /// when fixture scores drift beyond tolerance under the default.
  static ReadabilityConfig recalibrated() {
    return {SyllableRule::Hyphenation, ReadabilityScale::FleschCeiling};
  }
  std::string label() const;
  bool operator==(const ReadabilityConfig&) const = default;
};

}  // namespace wozlab
