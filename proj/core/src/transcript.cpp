#include "wozlab/transcript.hpp"

#include <sstream>

#include "wozlab/error.hpp"

namespace wozlab {

using nlohmann::json;

const char* to_string(Speaker s) {
  switch (s) {
    case Speaker::Wizard: return "wizard";
    case Speaker::Simulacrum: return "simulacrum";
    case Speaker::Participant: return "participant";
  }
  return "unknown";
}

Speaker speaker_from_string(const std::string& s) {
  if (s == "wizard") return Speaker::Wizard;
  if (s == "simulacrum") return Speaker::Simulacrum;
  if (s == "participant") return Speaker::Participant;
  throw ValidationError("unknown speaker '" + s + "'");
}

std::size_t ConversationTranscript::count(Speaker s) const {
  std::size_t n = 0;
  for (const auto& m : messages) n += m.speaker == s ? 1 : 0;
  return n;
}

bool ConversationTranscript::alternates() const {
  if (messages.empty()) return true;
  if (!is_wizard(messages.front().speaker)) return false;
  for (std::size_t i = 1; i < messages.size(); ++i) {
    if (is_wizard(messages[i].speaker) == is_wizard(messages[i - 1].speaker)) return false;
  }
  return true;
}

std::vector<json> to_records(const ConversationTranscript& t) {
  std::vector<json> out;
  out.push_back({{"record", "header"},
                 {"transcript_id", t.transcript_id},
                 {"stage", to_string(t.stage)},
                 {"status", t.complete() ? "complete" : "failed"},
                 {"failure_reason", t.failure_reason},
                 {"message_count", t.messages.size()},
                 {"notes", t.notes},
                 {"config", t.config}});
  for (std::size_t i = 0; i < t.messages.size(); ++i) {
    const auto& m = t.messages[i];
    out.push_back({{"record", "message"},
                   {"transcript_id", t.transcript_id},
                   {"message_index", i},
                   {"speaker", to_string(m.speaker)},
                   {"turn_index", m.turn_index},
                   {"text", m.text},
                   {"timestamp", m.timestamp}});
  }
  return out;
}

std::string to_jsonl(const ConversationTranscript& t) {
  std::string s;
  for (const auto& r : to_records(t)) {
    s += r.dump();
    s += '\n';
  }
  return s;
}

std::vector<ConversationTranscript> parse_transcripts(std::istream& in) {
  std::vector<ConversationTranscript> out;
  std::vector<std::size_t> expected;
  std::string line;
  std::size_t lineno = 0;
  auto fail = [&](const std::string& why) {
    throw IntegrityError("transcript line " + std::to_string(lineno) + ": " + why);
  };
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    json r;
    try {
      r = json::parse(line);
    } catch (const json::exception& e) {
      fail(e.what());
    }
    try {
      const auto kind = r.at("record").get<std::string>();
      if (kind == "header") {
        ConversationTranscript t;
        t.transcript_id = r.at("transcript_id").get<std::string>();
        t.stage = stage_from_string(r.at("stage").get<std::string>());
        t.status = r.at("status").get<std::string>() == "complete" ? TranscriptStatus::Complete
                                                                   : TranscriptStatus::Failed;
        t.failure_reason = r.value("failure_reason", std::string{});
        t.notes = r.value("notes", std::vector<std::string>{});
        t.config = r.at("config").get<ExperimentConfig>();
        expected.push_back(r.at("message_count").get<std::size_t>());
        out.push_back(std::move(t));
      } else if (kind == "message") {
        if (out.empty()) fail("message record before any header");
        auto& t = out.back();
        if (r.at("transcript_id").get<std::string>() != t.transcript_id)
          fail("message belongs to '" + r.at("transcript_id").get<std::string>() +
               "' but follows header of '" + t.transcript_id + "'");
        if (r.at("message_index").get<std::size_t>() != t.messages.size())
          fail("message index out of sequence");
        Message m;
        m.speaker = speaker_from_string(r.at("speaker").get<std::string>());
        m.turn_index = r.at("turn_index").get<int>();
        m.text = r.at("text").get<std::string>();
        m.timestamp = r.value("timestamp", std::string{});
        t.messages.push_back(std::move(m));
      } else {
        fail("unknown record kind '" + kind + "'");
      }
    } catch (const json::exception& e) {
      fail(e.what());
    } catch (const ValidationError& e) {
      fail(e.what());
    }
  }
  for (std::size_t i = 0; i < out.size(); ++i) {
    if (out[i].messages.size() != expected[i])
      throw IntegrityError("transcript '" + out[i].transcript_id + "' declares " +
                           std::to_string(expected[i]) + " messages but has " +
                           std::to_string(out[i].messages.size()));
  }
  return out;
}

std::vector<ConversationTranscript> read_transcripts(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw NotFoundError("cannot open transcript file " + path.string());
  return parse_transcripts(in);
}

void write_transcripts(const std::filesystem::path& path,
                       const std::vector<ConversationTranscript>& ts) {
  TranscriptStore store(path);
  for (std::size_t i = 0; i < ts.size(); ++i) store.commit(i, ts[i]);
}

TranscriptStore::TranscriptStore(const std::filesystem::path& path, bool truncate)
    : out_(path, truncate ? std::ios::trunc : std::ios::app) {
  if (!out_) throw ConfigError("cannot open transcript store " + path.string());
}

void TranscriptStore::commit(std::size_t sequence, const ConversationTranscript& t) {
  std::lock_guard lock(mu_);
  if (sequence < next_ || pending_.count(sequence))
    throw IntegrityError("transcript sequence " + std::to_string(sequence) + " committed twice");
  pending_.emplace(sequence, to_jsonl(t));
  flush_ready();
}

void TranscriptStore::flush_ready() {
  while (!pending_.empty() && pending_.begin()->first == next_) {
    out_ << pending_.begin()->second;
    pending_.erase(pending_.begin());
    ++next_;
  }
  out_.flush();
}

std::size_t TranscriptStore::written() const {
  std::lock_guard lock(mu_);
  return next_;
}

}  // namespace wozlab
