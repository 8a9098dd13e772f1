#include "wozlab/sentiment.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <sstream>

#include "wozlab/data_files.hpp"
#include "wozlab/error.hpp"
#include "wozlab/gateway.hpp"
#include "wozlab/utf8.hpp"

namespace wozlab {
namespace {

constexpr double kBoostIncr = 0.293;
constexpr double kBoostDecr = -0.293;
constexpr double kCapsIncr = 0.733;
constexpr double kNegationScalar = -0.74;
constexpr double kAlpha = 15.0;

const std::array<std::string_view, 59> kNegations = {
    "aint",     "arent",   "cannot",   "cant",     "couldnt",  "darent",   "didnt",
    "doesnt",   "ain't",   "aren't",   "can't",    "couldn't", "daren't",  "didn't",
    "doesn't",  "dont",    "hadnt",    "hasnt",    "havent",   "isnt",     "mightnt",
    "mustnt",   "neither", "don't",    "hadn't",   "hasn't",   "haven't",  "isn't",
    "mightn't", "mustn't", "neednt",   "needn't",  "never",    "none",     "nope",
    "nor",      "not",     "nothing",  "nowhere",  "oughtnt",  "shant",    "shouldnt",
    "uhuh",     "wasnt",   "werent",   "oughtn't", "shan't",   "shouldn't", "uh-uh",
    "wasn't",   "weren't", "without",  "wont",     "wouldnt",  "won't",    "wouldn't",
    "rarely",   "seldom",  "despite"};

const std::unordered_map<std::string, double>& boosters() {
  static const std::unordered_map<std::string, double> m = [] {
    std::unordered_map<std::string, double> b;
    for (const char* w :
         {"absolutely", "amazingly", "awfully", "completely", "considerable", "considerably",
          "decidedly", "deeply", "effing", "enormous", "enormously", "entirely", "especially",
          "exceptional", "exceptionally", "extreme", "extremely", "fabulously", "flipping",
          "flippin", "frackin", "fracking", "fricking", "frickin", "frigging", "friggin",
          "fully", "fuckin", "fucking", "fuggin", "fugging", "greatly", "hella", "highly",
          "hugely", "incredible", "incredibly", "intensely", "major", "majorly", "more",
          "most", "particularly", "purely", "quite", "really", "remarkably", "so",
          "substantially", "thoroughly", "total", "totally", "tremendous", "tremendously",
          "uber", "unbelievably", "unusually", "utter", "utterly", "very"})
      b.emplace(w, kBoostIncr);
    for (const char* w :
         {"almost", "barely", "hardly", "just enough", "kind of", "kinda", "kindof", "kind-of",
          "less", "little", "marginal", "marginally", "occasional", "occasionally", "partly",
          "scarce", "scarcely", "slight", "slightly", "somewhat", "sort of", "sorta", "sortof",
          "sort-of"})
      b.emplace(w, kBoostDecr);
    return b;
  }();
  return m;
}

const std::unordered_map<std::string, double>& special_cases() {
  static const std::unordered_map<std::string, double> m = {
      {"the shit", 3},      {"the bomb", 3},       {"bad ass", 1.5},   {"badass", 1.5},
      {"bus stop", 0.0},    {"yeah right", -2},    {"kiss of death", -1.5},
      {"to die for", 3},    {"beating heart", 3.5}};
  return m;
}

bool is_space(char32_t c) {
  return c == ' ' || (c >= 0x09 && c <= 0x0D) || (c >= 0x1C && c <= 0x1F) || c == 0x85 ||
         c == 0xA0 || c == 0x1680 || (c >= 0x2000 && c <= 0x200A) || c == 0x2028 ||
         c == 0x2029 || c == 0x202F || c == 0x205F || c == 0x3000;
}

bool is_ascii_punct(char32_t c) {
  return c < 0x80 && std::ispunct(static_cast<int>(c)) != 0;
}

std::string ascii_lower(std::string s) {
  for (auto& c : s)
    if (c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
  return s;
}

// str.isupper(): at least one cased character and none lowercase. Only
// ASCII letters are treated as cased.
bool is_upper(const std::string& s) {
  bool cased = false;
  for (char c : s) {
    if (c >= 'a' && c <= 'z') return false;
    if (c >= 'A' && c <= 'Z') cased = true;
  }
  return cased;
}

bool negated(const std::string& lower_word) {
  for (auto n : kNegations)
    if (lower_word == n) return true;
  return lower_word.find("n't") != std::string::npos;
}

double scalar_inc_dec(const std::string& word, double valence, bool cap_diff) {
  const auto& b = boosters();
  auto it = b.find(ascii_lower(word));
  if (it == b.end()) return 0.0;
  double scalar = it->second;
  if (valence < 0) scalar *= -1;
  if (is_upper(word) && cap_diff) scalar += valence > 0 ? kCapsIncr : -kCapsIncr;
  return scalar;
}

double negation_check(double valence, const std::vector<std::string>& w, int start_i,
                      std::size_t i) {
  if (start_i == 0) {
    if (negated(w[i - 1])) valence *= kNegationScalar;
  } else if (start_i == 1) {
    if (w[i - 2] == "never" && (w[i - 1] == "so" || w[i - 1] == "this")) {
      valence *= 1.25;
    } else if (w[i - 2] == "without" && w[i - 1] == "doubt") {
    } else if (negated(w[i - 2])) {
      valence *= kNegationScalar;
    }
  } else if (start_i == 2) {
    if ((w[i - 3] == "never" && (w[i - 2] == "so" || w[i - 2] == "this")) ||
        (w[i - 1] == "so" || w[i - 1] == "this")) {
      valence *= 1.25;
    } else if (w[i - 3] == "without" && (w[i - 2] == "doubt" || w[i - 1] == "doubt")) {
    } else if (negated(w[i - 3])) {
      valence *= kNegationScalar;
    }
  }
  return valence;
}

double special_idioms_check(double valence, const std::vector<std::string>& w, std::size_t i) {
  const auto& sc = special_cases();
  const std::string onezero = w[i - 1] + " " + w[i];
  const std::string twoonezero = w[i - 2] + " " + w[i - 1] + " " + w[i];
  const std::string twoone = w[i - 2] + " " + w[i - 1];
  const std::string threetwoone = w[i - 3] + " " + w[i - 2] + " " + w[i - 1];
  const std::string threetwo = w[i - 3] + " " + w[i - 2];
  for (const auto* seq : {&onezero, &twoonezero, &twoone, &threetwoone, &threetwo}) {
    if (auto it = sc.find(*seq); it != sc.end()) {
      valence = it->second;
      break;
    }
  }
  if (w.size() - 1 > i) {
    if (auto it = sc.find(w[i] + " " + w[i + 1]); it != sc.end()) valence = it->second;
  }
  if (w.size() - 1 > i + 1) {
    if (auto it = sc.find(w[i] + " " + w[i + 1] + " " + w[i + 2]); it != sc.end())
      valence = it->second;
  }
  const auto& b = boosters();
  for (const auto* ng : {&threetwoone, &threetwo, &twoone}) {
    if (auto it = b.find(*ng); it != b.end()) valence += it->second;
  }
  return valence;
}

double normalize(double score) {
  const double n = score / std::sqrt(score * score + kAlpha);
  return std::clamp(n, -1.0, 1.0);
}

std::vector<std::string> split_lines(const std::string& content) {
  std::vector<std::string> lines;
  std::string line;
  std::istringstream in(content);
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    lines.push_back(line);
  }
  return lines;
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw ConfigError("cannot read lexicon file " + p.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

SentimentAnalyzer::SentimentAnalyzer(const std::filesystem::path& lexicon_file,
                                     const std::filesystem::path& emoji_file) {
  const std::string lex = slurp(lexicon_file);
  std::size_t lineno = 0;
  for (const auto& line : split_lines(lex)) {
    ++lineno;
    if (line.empty()) continue;
    const auto tab = line.find('\t');
    if (tab == std::string::npos)
      throw ConfigError(lexicon_file.string() + ":" + std::to_string(lineno) + ": missing tab");
    const auto tab2 = line.find('\t', tab + 1);
    const std::string measure = line.substr(tab + 1, tab2 == std::string::npos ? std::string::npos : tab2 - tab - 1);
    try {
      lexicon_[line.substr(0, tab)] = std::stod(measure);
    } catch (const std::exception&) {
      throw ConfigError(lexicon_file.string() + ":" + std::to_string(lineno) +
                        ": bad valence '" + measure + "'");
    }
  }
  if (lexicon_.empty()) throw ConfigError("lexicon file " + lexicon_file.string() + " is empty");

  const std::string emo = slurp(emoji_file);
  for (const auto& line : split_lines(emo)) {
    const auto tab = line.find('\t');
    if (tab == std::string::npos) continue;
    const auto key = utf8::decode(line.substr(0, tab));
    // Replacement scans one code point at a time, so only single code point
    // keys can ever match.
    if (key.size() != 1) continue;
    const auto tab2 = line.find('\t', tab + 1);
    emojis_.emplace(key[0], line.substr(tab + 1, tab2 == std::string::npos ? std::string::npos
                                                                           : tab2 - tab - 1));
  }
  version_ = "vader-lexicon:" + content_hash(lex);
}

const SentimentAnalyzer& SentimentAnalyzer::shared() {
  static const SentimentAnalyzer analyzer(data_file("vader_lexicon.txt"),
                                          data_file("emoji_utf8_lexicon.txt"));
  return analyzer;
}

double SentimentAnalyzer::valence_of(const std::string& token) const {
  auto it = lexicon_.find(token);
  return it == lexicon_.end() ? 0.0 : it->second;
}

double SentimentAnalyzer::word_valence(const std::vector<std::string>& words,
                                       const std::vector<std::string>& lower, std::size_t i,
                                       bool cap_diff) const {
  const std::string& item = words[i];
  const std::string& item_lower = lower[i];
  auto it = lexicon_.find(item_lower);
  if (it == lexicon_.end()) return 0.0;
  double valence = it->second;

  if (item_lower == "no" && i != words.size() - 1 && in_lexicon(lower[i + 1])) valence = 0.0;
  if ((i > 0 && lower[i - 1] == "no") || (i > 1 && lower[i - 2] == "no") ||
      (i > 2 && lower[i - 3] == "no" && (lower[i - 1] == "or" || lower[i - 1] == "nor")))
    valence = it->second * kNegationScalar;

  if (is_upper(item) && cap_diff) valence += valence > 0 ? kCapsIncr : -kCapsIncr;

  for (int start_i = 0; start_i < 3; ++start_i) {
    const std::size_t back = static_cast<std::size_t>(start_i) + 1;
    if (i > static_cast<std::size_t>(start_i) && !in_lexicon(lower[i - back])) {
      double s = scalar_inc_dec(words[i - back], valence, cap_diff);
      if (start_i == 1 && s != 0) s *= 0.95;
      if (start_i == 2 && s != 0) s *= 0.9;
      valence += s;
      valence = negation_check(valence, lower, start_i, i);
      if (start_i == 2) valence = special_idioms_check(valence, lower, i);
    }
  }

  // "least" as negation, except in "at least" / "very least".
  if (i > 1 && !in_lexicon(lower[i - 1]) && lower[i - 1] == "least") {
    if (lower[i - 2] != "at" && lower[i - 2] != "very") valence *= kNegationScalar;
  } else if (i > 0 && !in_lexicon(lower[i - 1]) && lower[i - 1] == "least") {
    valence *= kNegationScalar;
  }
  return valence;
}

PolarityScores SentimentAnalyzer::polarity_scores(std::string_view text_in) const {
  // Emojis become their textual descriptions.
  const auto cps = utf8::decode(text_in);
  std::u32string text32;
  bool prev_space = true;
  for (char32_t c : cps) {
    if (auto it = emojis_.find(c); it != emojis_.end()) {
      if (!prev_space) text32.push_back(U' ');
      text32 += utf8::decode(it->second);
      prev_space = false;
    } else {
      text32.push_back(c);
      prev_space = c == U' ';
    }
  }
  std::size_t b = 0, e = text32.size();
  while (b < e && is_space(text32[b])) ++b;
  while (e > b && is_space(text32[e - 1])) --e;
  const std::u32string_view text(text32.data() + b, e - b);

  // Whitespace tokens with leading/trailing punctuation removed, unless
  // that leaves two or fewer characters (likely an emoticon).
  std::vector<std::string> words;
  std::size_t i = 0;
  while (i < text.size()) {
    while (i < text.size() && is_space(text[i])) ++i;
    if (i >= text.size()) break;
    std::size_t j = i;
    while (j < text.size() && !is_space(text[j])) ++j;
    std::u32string_view tok = text.substr(i, j - i);
    std::size_t s = 0, t = tok.size();
    while (s < t && is_ascii_punct(tok[s])) ++s;
    while (t > s && is_ascii_punct(tok[t - 1])) --t;
    words.push_back(utf8::encode(t - s <= 2 ? tok : tok.substr(s, t - s)));
    i = j;
  }
  std::vector<std::string> lower;
  lower.reserve(words.size());
  for (const auto& w : words) lower.push_back(ascii_lower(w));

  std::size_t caps = 0;
  for (const auto& w : words) caps += is_upper(w) ? 1 : 0;
  const std::size_t cap_differential = words.size() - caps;
  const bool cap_diff = cap_differential > 0 && cap_differential < words.size();

  const auto& bst = boosters();
  std::vector<double> sentiments;
  sentiments.reserve(words.size());
  for (std::size_t k = 0; k < words.size(); ++k) {
    if (bst.count(lower[k]) ||
        (k + 1 < words.size() && lower[k] == "kind" && lower[k + 1] == "of")) {
      sentiments.push_back(0.0);
      continue;
    }
    sentiments.push_back(word_valence(words, lower, k, cap_diff));
  }

  // Contrastive "but": halve what precedes it, boost what follows. Each
  // pass rescales the first entry equal to the current one, as the
  // reference implementation does.
  if (auto it = std::find(lower.begin(), lower.end(), "but"); it != lower.end()) {
    const std::size_t bi = static_cast<std::size_t>(it - lower.begin());
    for (std::size_t k = 0; k < sentiments.size(); ++k) {
      const double s = sentiments[k];
      const std::size_t si =
          static_cast<std::size_t>(std::find(sentiments.begin(), sentiments.end(), s) - sentiments.begin());
      if (si < bi) sentiments[si] = s * 0.5;
      else if (si > bi) sentiments[si] = s * 1.5;
    }
  }

  PolarityScores out;
  if (sentiments.empty()) return out;

  double sum = 0.0;
  for (double s : sentiments) sum += s;
  const auto count = [&](char32_t ch) {
    return static_cast<int>(std::count(text.begin(), text.end(), ch));
  };
  const int ep = std::min(count(U'!'), 4);
  const int qm = count(U'?');
  double qm_amp = 0.0;
  if (qm > 1) qm_amp = qm <= 3 ? qm * 0.18 : 0.96;
  const double punct = ep * 0.292 + qm_amp;
  if (sum > 0) sum += punct;
  else if (sum < 0) sum -= punct;
  out.compound = normalize(sum);

  double pos = 0.0, neg = 0.0;
  int neu = 0;
  for (double s : sentiments) {
    if (s > 0) pos += s + 1;
    if (s < 0) neg += s - 1;
    if (s == 0) ++neu;
  }
  if (pos > std::fabs(neg)) pos += punct;
  else if (pos < std::fabs(neg)) neg -= punct;
  const double total = pos + std::fabs(neg) + neu;
  out.positive = std::fabs(pos / total);
  out.negative = std::fabs(neg / total);
  out.neutral = std::fabs(neu / total);
  return out;
}

double sentiment_compound(std::string_view text) {
  return SentimentAnalyzer::shared().compound(text);
}

}  // namespace wozlab
