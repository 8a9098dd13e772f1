#pragma once

#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "wozlab/experiment.hpp"

namespace wozlab {

enum class Speaker { Wizard, Simulacrum, Participant };

const char* to_string(Speaker s);
Speaker speaker_from_string(const std::string& s);
inline bool is_wizard(Speaker s) { return s == Speaker::Wizard; }

struct Message {
  Speaker speaker = Speaker::Wizard;
  int turn_index = 0;  // 0 for the wizard's opening message
  std::string text;
  std::string timestamp;  // ISO-8601 UTC

  bool operator==(const Message&) const = default;
};

enum class TranscriptStatus { Complete, Failed };

struct ConversationTranscript {
  std::string transcript_id;
  ExperimentConfig config;
  std::vector<Message> messages;
  TranscriptStatus status = TranscriptStatus::Complete;
  std::string failure_reason;
  Stage stage = Stage::Simulated;
  std::vector<std::string> notes;

  bool complete() const { return status == TranscriptStatus::Complete; }
  std::size_t count(Speaker s) const;
  /// Opening wizard message, then strict alternation.
  bool alternates() const;

  bool operator==(const ConversationTranscript&) const = default;
};

/// Expected message count for a completed conversation: an opening message
/// plus one (interlocutor, wizard) exchange per turn.
constexpr std::size_t expected_message_count(int turn_limit) {
  return 1 + 2 * static_cast<std::size_t>(turn_limit);
}

// Line-delimited store: a header record per conversation carrying the full
// config, followed by one record per message.
std::vector<nlohmann::json> to_records(const ConversationTranscript& t);
std::string to_jsonl(const ConversationTranscript& t);
/// Throws IntegrityError (with line numbers) on malformed input.
std::vector<ConversationTranscript> parse_transcripts(std::istream& in);
std::vector<ConversationTranscript> read_transcripts(const std::filesystem::path& path);
void write_transcripts(const std::filesystem::path& path,
                       const std::vector<ConversationTranscript>& ts);

/// Append-only transcript file with a single writer. Commits arrive tagged
/// with a sequence number and are written strictly in sequence order, so
/// the file is identical however the producing runs were scheduled.
class TranscriptStore {
 public:
  explicit TranscriptStore(const std::filesystem::path& path, bool truncate = true);

  void commit(std::size_t sequence, const ConversationTranscript& t);
  std::size_t written() const;

 private:
  void flush_ready();

  mutable std::mutex mu_;
  std::ofstream out_;
  std::size_t next_ = 0;
  std::map<std::size_t, std::string> pending_;
};

}  // namespace wozlab
