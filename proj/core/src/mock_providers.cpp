#include "wozlab/mock_providers.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <sstream>

#include "wozlab/random.hpp"

namespace wozlab {

// ---- scripted -------------------------------------------------------------

ScriptedChatBackend::ScriptedChatBackend(Script script, std::string id)
    : script_(std::move(script)), id_(std::move(id)) {}

ChatResult ScriptedChatBackend::complete_once(const ChatRequest& req) {
  int index;
  {
    std::lock_guard lock(mu_);
    requests_.push_back(req);
    index = calls_++;
  }
  return script_(req, index);
}

std::vector<ChatRequest> ScriptedChatBackend::requests() const {
  std::lock_guard lock(mu_);
  return requests_;
}

int ScriptedChatBackend::calls() const {
  std::lock_guard lock(mu_);
  return calls_;
}

std::shared_ptr<ScriptedChatBackend> ScriptedChatBackend::echo(std::string text) {
  return std::make_shared<ScriptedChatBackend>([text](const ChatRequest&, int) {
    ChatResult r;
    r.text = text;
    return r;
  });
}

std::shared_ptr<ScriptedChatBackend> ScriptedChatBackend::failing_then(int failures,
                                                                       std::string text) {
  return std::make_shared<ScriptedChatBackend>([failures, text](const ChatRequest&, int call) {
    if (call < failures) throw TransportError("scripted failure " + std::to_string(call + 1));
    ChatResult r;
    r.text = text;
    return r;
  });
}

std::shared_ptr<ScriptedChatBackend> ScriptedChatBackend::always_failing() {
  return std::make_shared<ScriptedChatBackend>(
      [](const ChatRequest&, int call) -> ChatResult {
        throw TransportError("scripted failure " + std::to_string(call + 1));
      });
}

// ---- mock conversation -----------------------------------------------------

namespace {

std::uint64_t fnv(std::string_view s, std::uint64_t h = 0xcbf29ce484222325ULL) {
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string extract_after(const std::string& text, const std::string& marker,
                          const std::string& stop) {
  const auto pos = text.find(marker);
  if (pos == std::string::npos) return {};
  const auto start = pos + marker.size();
  const auto end = text.find(stop, start);
  return text.substr(start, end == std::string::npos ? std::string::npos : end - start);
}

const std::vector<std::string> kOpeners = {
    "That's a great point.", "I hear you.", "Thanks for sharing that.", "Interesting!",
    "I appreciate your perspective.", "That makes a lot of sense.", "Good question.",
    "I hadn't thought of it that way.",
};

const std::vector<std::string> kTopicLines = {
    "When it comes to {T}, I think the long-term benefits are worth considering.",
    "Many people I know have mixed feelings about {T}.",
    "The costs around {T} can feel high at first, but savings add up over time.",
    "I've been reading a lot about {T} lately and the options keep improving.",
    "For me, {T} is really about making choices that fit my budget and values.",
    "Friends of mine changed their minds about {T} after trying it.",
};

const std::vector<std::string> kChatLines = {
    "I spent the weekend hiking and cooking with friends.",
    "Lately I've been trying to read more before bed.",
    "Music always helps me unwind after a long day.",
    "I love trying new recipes when I have the time.",
    "Traveling somewhere new is one of my favorite things.",
    "I've been learning a bit of gardening this spring.",
};

const std::vector<std::string> kQuestions = {
    "What do you think?", "How about you?", "Have you considered it yourself?",
    "What matters most to you here?", "Would you give it a try?",
    "What has your experience been like?",
};

std::string topic_phrase(const std::string& prompt) {
  if (prompt.find("electric vehicles") != std::string::npos) return "electric vehicles";
  if (prompt.find("household electrification") != std::string::npos)
    return "green household electrification";
  if (prompt.find("donation to charities") != std::string::npos) return "donating to charities";
  return {};
}

}  // namespace

MockConversationBackend::MockConversationBackend(std::uint64_t salt) : salt_(salt) {}

ChatResult MockConversationBackend::complete_once(const ChatRequest& req) {
  const std::string name = extract_after(req.system_prompt, "Your name is ", ".");
  const bool is_wizard = req.system_prompt.find("Conduct a conversation") != std::string::npos;
  const std::string topic = topic_phrase(req.system_prompt);

  std::uint64_t h = fnv(req.system_prompt, salt_ ^ 0x9e3779b97f4a7c15ULL);
  h = fnv(std::to_string(req.history.size()), h);
  if (!req.history.empty()) h = fnv(req.history.back().text, h);
  Rng rng(splitmix64(h));
  auto pick = [&](const std::vector<std::string>& bank) -> const std::string& {
    return bank[rng.below(bank.size())];
  };
  auto fill = [&](std::string line) {
    const auto p = line.find("{T}");
    if (p != std::string::npos) line.replace(p, 3, topic);
    return line;
  };

  std::ostringstream os;
  if (req.history.empty()) {
    os << "Hi, I'm " << name;
    if (req.system_prompt.find("a chatbot at the beginning") != std::string::npos)
      os << ", a chatbot";
    os << ". ";
    if (!topic.empty()) os << "I'd love to chat about " << topic << ". ";
    else os << "I'd love to get to know you. ";
    os << pick(kQuestions);
  } else {
    const bool greet = req.history.size() == 1 && !is_wizard;
    if (greet) os << "Hi, I'm " << name << ". Nice to meet you! ";
    else os << pick(kOpeners) << " ";
    os << (topic.empty() ? pick(kChatLines) : fill(pick(kTopicLines))) << " ";
    os << pick(kQuestions);
  }
  ChatResult r;
  r.text = os.str();
  r.raw_payload = "{\"mock\":true}";
  return r;
}

// ---- hashing embeddings -----------------------------------------------------

HashingEmbeddingBackend::HashingEmbeddingBackend(std::size_t dimension) : dimension_(dimension) {
  if (dimension_ < 2) dimension_ = 2;
}

Embedding HashingEmbeddingBackend::embed_one(const std::string& text) const {
  std::vector<double> v(dimension_, 0.0);
  v[0] = 1.0;  // bias keeps the empty-input embedding well defined
  std::vector<std::string> words;
  std::string cur;
  for (unsigned char c : text) {
    if (std::isalnum(c) || c == '\'') {
      cur.push_back(static_cast<char>(std::tolower(c)));
    } else if (!cur.empty()) {
      words.push_back(std::move(cur));
      cur.clear();
    }
  }
  if (!cur.empty()) words.push_back(std::move(cur));
  auto add = [&](std::string_view feature, double weight) {
    const std::uint64_t h = fnv(feature);
    const std::size_t slot = 1 + static_cast<std::size_t>(h % (dimension_ - 1));
    v[slot] += ((h >> 63) != 0 ? -1.0 : 1.0) * weight;
  };
  for (std::size_t i = 0; i < words.size(); ++i) {
    add(words[i], 1.0);
    if (i + 1 < words.size()) add(words[i] + " " + words[i + 1], 0.5);
  }
  double norm = 0.0;
  for (double x : v) norm += x * x;
  norm = std::sqrt(norm);
  Embedding e(dimension_);
  for (std::size_t i = 0; i < dimension_; ++i) e[i] = static_cast<float>(v[i] / norm);
  return e;
}

std::vector<Embedding> HashingEmbeddingBackend::embed_once(std::span<const std::string> texts) {
  std::vector<Embedding> out;
  out.reserve(texts.size());
  for (const auto& t : texts) out.push_back(embed_one(t));
  return out;
}

// ---- table toxicity -----------------------------------------------------------

TableToxicityBackend::TableToxicityBackend(std::map<std::string, double> table, double baseline)
    : table_(std::move(table)), baseline_(baseline) {}

double TableToxicityBackend::score_once(const std::string& text) {
  if (auto it = table_.find(text); it != table_.end()) return it->second;
  static const std::vector<std::string> insults = {"idiot", "stupid", "hate", "moron", "dumb",
                                                   "shut up", "loser", "pathetic"};
  std::string lower(text);
  std::transform(lower.begin(), lower.end(), lower.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  double s = baseline_;
  for (const auto& w : insults)
    if (lower.find(w) != std::string::npos) s += 0.3;
  return std::min(1.0, s);
}

}  // namespace wozlab
