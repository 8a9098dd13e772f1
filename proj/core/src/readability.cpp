#include "wozlab/readability.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "wozlab/data_files.hpp"
#include "wozlab/error.hpp"
#include "wozlab/utf8.hpp"

namespace wozlab {
namespace {

bool is_vowel(char c) {
  return c == 'a' || c == 'e' || c == 'i' || c == 'o' || c == 'u' || c == 'y';
}

bool ends_with(const std::string& s, std::string_view suffix) {
  return s.size() >= suffix.size() && s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
}

bool is_word_byte(unsigned char c) {
  return std::isalnum(c) != 0 || c >= 0x80;
}

bool is_terminal(char c) { return c == '.' || c == '!' || c == '?'; }

int count_words(std::string_view text) {
  int n = 0;
  std::size_t i = 0;
  while (i < text.size()) {
    while (i < text.size() && std::isspace(static_cast<unsigned char>(text[i]))) ++i;
    std::size_t j = i;
    bool has_word = false;
    while (j < text.size() && !std::isspace(static_cast<unsigned char>(text[j]))) {
      has_word = has_word || is_word_byte(static_cast<unsigned char>(text[j]));
      ++j;
    }
    n += has_word ? 1 : 0;
    i = j;
  }
  return n;
}

// Silent e before a consonant-initial suffix: "lovely", "statement".
void drop_inner_silent_e(std::string& w) {
  for (std::string_view suffix : {"ly", "ment", "ful", "ness", "less"}) {
    if (w.size() >= suffix.size() + 3 && ends_with(w, suffix)) {
      const std::size_t e = w.size() - suffix.size() - 1;
      if (w[e] == 'e' && !is_vowel(w[e - 1]) && is_vowel(w[e - 2])) {
        w.erase(e, 1);
        return;
      }
    }
  }
}

int vowel_group_syllables(std::string_view word) {
  std::string w;
  bool digit = false;
  for (char c : word) {
    const auto u = static_cast<unsigned char>(c);
    if (std::isalpha(u)) w.push_back(static_cast<char>(std::tolower(u)));
    else if (std::isdigit(u)) digit = true;
  }
  if (w.empty()) return digit ? 1 : 0;
  if (w.size() <= 3) return 1;

  const std::size_t n = w.size();
  if (ends_with(w, "ed")) {
    const char c = w[n - 3];
    if (c != 't' && c != 'd' && !is_vowel(c)) w.resize(n - 2);
  } else if (ends_with(w, "es")) {
    const char c = w[n - 3];
    const bool sibilant = c == 's' || c == 'x' || c == 'z' || ends_with(w, "ches") ||
                          ends_with(w, "shes") || ends_with(w, "ces") || ends_with(w, "ges");
    if (!sibilant && !is_vowel(c)) w.resize(n - 2);
  } else if (ends_with(w, "e")) {
    const bool syllabic_le = ends_with(w, "le") && !is_vowel(w[n - 3]);
    if (!syllabic_le && !is_vowel(w[n - 2])) w.resize(n - 1);
  }
  drop_inner_silent_e(w);
  if (!w.empty() && w[0] == 'y') w.erase(0, 1);

  int count = 0;
  for (std::size_t i = 0; i < w.size(); ++i) {
    if (is_vowel(w[i]) && (i == 0 || !is_vowel(w[i - 1]))) ++count;
  }
  // Adjacent vowels that are pronounced separately.
  for (std::size_t i = 0; i + 1 < w.size(); ++i) {
    const char a = w[i], b = w[i + 1];
    const char before = i > 0 ? w[i - 1] : '\0';
    const char after = i + 2 < w.size() ? w[i + 2] : '\0';
    if (a == 'i' && b == 'a' && before != 'c' && before != 't' && before != 's' && before != 'g') ++count;
    else if (a == 'i' && b == 'o' && before != 't' && before != 's' && before != 'c' &&
             before != 'x' && before != 'g')
      ++count;
    else if (a == 'u' && b == 'a' && before != 'q' && before != 'g') ++count;
    else if (a == 'i' && b == 'u') ++count;
    else if (a == 'i' && b == 'e' && (after == 't' || (after == 'n' && i + 3 < w.size() && w[i + 3] == 'c'))) ++count;
  }
  return std::max(count, 1);
}

bool is_word_cp(char32_t c) {
  return c >= 0x80 || (c < 0x80 && (std::isalnum(static_cast<int>(c)) != 0 || c == '_'));
}

// Lowercases and strips punctuation the way text-statistics packages do
// before hyphenating: apostrophes survive only inside contractions, hyphens
// join their parts.
std::vector<std::u32string> hyphenation_tokens(std::string_view text) {
  const auto in = utf8::decode(text);
  std::u32string cleaned;
  for (std::size_t i = 0; i < in.size(); ++i) {
    char32_t c = in[i];
    if (c < 0x80) c = static_cast<char32_t>(std::tolower(static_cast<int>(c)));
    if (c == U'\'') {
      auto boundary = [&](std::size_t k) { return k >= in.size() || !is_word_cp(in[k]); };
      auto lower_at = [&](std::size_t k) {
        return k < in.size() && in[k] < 0x80 ? static_cast<char32_t>(std::tolower(static_cast<int>(in[k]))) : char32_t{0};
      };
      const char32_t a = lower_at(i + 1), b = lower_at(i + 2);
      const bool contraction = ((a == U't' || a == U's' || a == U'd') && boundary(i + 2)) ||
                               (a == U'v' && b == U'e' && boundary(i + 3)) ||
                               (a == U'l' && b == U'l' && boundary(i + 3)) ||
                               (a == U'r' && b == U'e' && boundary(i + 3));
      if (contraction) cleaned.push_back(c);
      continue;
    }
    if (is_word_cp(c) || c == U' ' || (c >= 0x09 && c <= 0x0D)) cleaned.push_back(c);
  }
  std::vector<std::u32string> out;
  std::u32string cur;
  for (char32_t c : cleaned) {
    if (c == U' ' || (c >= 0x09 && c <= 0x0D)) {
      if (!cur.empty()) out.push_back(std::move(cur));
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  if (!cur.empty()) out.push_back(std::move(cur));
  return out;
}

}  // namespace

const char* to_string(SyllableRule r) {
  return r == SyllableRule::VowelGroups ? "vowel-groups" : "hyphenation";
}

SyllableRule syllable_rule_from_string(std::string_view s) {
  if (s == "vowel-groups") return SyllableRule::VowelGroups;
  if (s == "hyphenation") return SyllableRule::Hyphenation;
  throw ConfigError("unknown syllable rule '" + std::string(s) + "'");
}

HyphenationPatterns::HyphenationPatterns(const std::filesystem::path& file, int left_min,
                                         int right_min)
    : left_min_(left_min), right_min_(right_min) {
  std::ifstream in(file, std::ios::binary);
  if (!in) throw ConfigError("cannot read hyphenation patterns " + file.string());
  std::string line;
  std::getline(in, line);  // character encoding
  while (std::getline(in, line)) {
    while (!line.empty() && (line.back() == '\r' || line.back() == ' ')) line.pop_back();
    if (line.empty() || line[0] == '%' || line[0] == '#' ||
        line.find("HYPHENMIN") != std::string::npos)
      continue;
    const auto cps = utf8::decode(line);
    std::u32string letters;
    std::vector<unsigned char> values;
    unsigned char pending = 0;
    for (char32_t c : cps) {
      if (c >= U'0' && c <= U'9') {
        pending = static_cast<unsigned char>(c - U'0');
      } else {
        values.push_back(pending);
        pending = 0;
        letters.push_back(c);
      }
    }
    values.push_back(pending);
    if (*std::max_element(values.begin(), values.end()) == 0) continue;
    max_len_ = std::max(max_len_, letters.size());
    patterns_[letters] = std::move(values);
  }
  if (patterns_.empty()) throw ConfigError("no hyphenation patterns in " + file.string());
}

const HyphenationPatterns& HyphenationPatterns::shared() {
  static const HyphenationPatterns p(data_file("hyph_en_US.dic"));
  return p;
}

std::vector<std::size_t> HyphenationPatterns::positions(std::u32string_view word) const {
  std::u32string dotted;
  dotted.reserve(word.size() + 2);
  dotted.push_back(U'.');
  dotted.append(word);
  dotted.push_back(U'.');
  std::vector<unsigned char> refs(dotted.size() + 1, 0);
  std::u32string key;
  for (std::size_t i = 0; i + 1 < dotted.size(); ++i) {
    const std::size_t stop = std::min(i + max_len_, dotted.size());
    for (std::size_t j = i + 1; j <= stop; ++j) {
      key.assign(dotted, i, j - i);
      auto it = patterns_.find(key);
      if (it == patterns_.end()) continue;
      const auto& v = it->second;
      for (std::size_t k = 0; k < v.size() && i + k < refs.size(); ++k)
        refs[i + k] = std::max(refs[i + k], v[k]);
    }
  }
  std::vector<std::size_t> out;
  const auto n = static_cast<long>(word.size());
  for (std::size_t i = 1; i < refs.size(); ++i) {
    if (refs[i] % 2 == 0) continue;
    const long pos = static_cast<long>(i) - 1;
    if (pos >= left_min_ && pos <= n - right_min_) out.push_back(static_cast<std::size_t>(pos));
  }
  return out;
}

int count_syllables(std::string_view word, SyllableRule rule) {
  if (rule == SyllableRule::VowelGroups) return vowel_group_syllables(word);
  int total = 0;
  for (const auto& tok : hyphenation_tokens(word))
    total += static_cast<int>(HyphenationPatterns::shared().positions(tok).size()) + 1;
  return total;
}

TextCounts count_text(std::string_view text, SyllableRule rule) {
  TextCounts c;
  c.words = count_words(text);

  if (rule == SyllableRule::Hyphenation) {
    const auto& patterns = HyphenationPatterns::shared();
    for (const auto& tok : hyphenation_tokens(text))
      c.syllables += static_cast<int>(patterns.positions(tok).size()) + 1;
  } else {
    std::size_t i = 0;
    while (i < text.size()) {
      while (i < text.size() && std::isspace(static_cast<unsigned char>(text[i]))) ++i;
      std::size_t j = i;
      while (j < text.size() && !std::isspace(static_cast<unsigned char>(text[j]))) ++j;
      c.syllables += vowel_group_syllables(text.substr(i, j - i));
      i = j;
    }
  }

  int sentences = 0;
  std::size_t i = 0;
  while (i < text.size()) {
    while (i < text.size() && !is_word_byte(static_cast<unsigned char>(text[i]))) ++i;
    if (i >= text.size()) break;
    std::size_t j = i;
    while (j < text.size() && !is_terminal(text[j])) ++j;
    if (count_words(text.substr(i, j - i)) > 2) ++sentences;
    while (j < text.size() && is_terminal(text[j])) ++j;
    i = j;
  }
  c.sentences = std::max(sentences, 1);
  return c;
}

double flesch_reading_ease(std::string_view text, SyllableRule rule) {
  const auto c = count_text(text, rule);
  if (c.words == 0) throw UndefinedMetricError("reading ease of a text with no words");
  return 206.835 - 1.015 * (static_cast<double>(c.words) / c.sentences) -
         84.6 * (static_cast<double>(c.syllables) / c.words);
}

const char* to_string(ReadabilityScale s) {
  return s == ReadabilityScale::Percent ? "percent" : "flesch-ceiling";
}

ReadabilityScale readability_scale_from_string(std::string_view s) {
  if (s == "percent") return ReadabilityScale::Percent;
  if (s == "flesch-ceiling") return ReadabilityScale::FleschCeiling;
  throw ConfigError("unknown readability scale '" + std::string(s) + "'");
}

double normalize_readability(double raw, ReadabilityScale scale) {
  const double top = scale == ReadabilityScale::Percent ? 100.0 : kFleschCeiling;
  return std::clamp(raw, 0.0, top) / top;
}

std::string ReadabilityConfig::label() const {
  return std::string("flesch:") + to_string(syllables) + ":" + to_string(scale);
}

}  // namespace wozlab
