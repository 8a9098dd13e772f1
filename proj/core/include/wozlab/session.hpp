#pragma once

#include <chrono>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "wozlab/engine.hpp"
#include "wozlab/experiment.hpp"
#include "wozlab/gateway.hpp"
#include "wozlab/persona.hpp"
#include "wozlab/random.hpp"
#include "wozlab/transcript.hpp"

namespace wozlab {

enum class SessionState { Active, AwaitingSurvey, Complete, Abandoned, Failed };
const char* to_string(SessionState s);
SessionState session_state_from_string(const std::string& s);

struct ParticipantMeta {
  std::string participant_id;
  bool consent = false;
  bool operator==(const ParticipantMeta&) const = default;
};

struct SurveyInstrument {
  std::string version;
  bool placeholder = true;
  int likert_min = 1;
  int likert_max = 5;
  std::vector<std::string> rapport_items;
  std::vector<std::string> partner_impression_items;
  std::vector<std::string> quality_items;
  std::vector<std::string> bot_identity_options;
  nlohmann::json raw;

  static SurveyInstrument from_json(const nlohmann::json& j);
  /// Throws ConfigError.
  static SurveyInstrument load(const std::filesystem::path& path);
  /// data/survey_instrument.json, placeholder wording.
  static const SurveyInstrument& shipped();
};

struct SurveyResponse {
  std::string session_id;
  std::vector<int> rapport_items;
  std::vector<int> partner_impression_items;
  std::vector<int> quality_items;
  std::string perceived_bot_identity;
  std::string open_feedback;
  Persona demographics;
  std::string submitted_at;

  bool operator==(const SurveyResponse&) const = default;
};

void to_json(nlohmann::json& j, const SurveyResponse& s);
void from_json(const nlohmann::json& j, SurveyResponse& s);

/// Throws ValidationError: item counts must match the instrument, every
/// Likert value must lie in its range, the identity answer must be one of
/// the instrument's options and the demographics members of `dims`.
void validate_survey(const SurveyResponse& s, const SurveyInstrument& instrument,
                     const DimensionSet& dims);

struct Session {
  std::string session_id;
  ParticipantMeta participant;
  ExperimentConfig config;
  ConversationTranscript transcript;
  int turn_count = 0;
  SessionState state = SessionState::Active;
  /// A participant message is stored but its reply failed; retry to
  /// regenerate.
  bool reply_pending = false;
  std::string failure_reason;
  std::optional<SurveyResponse> survey;
  std::string completion_code;
  std::string created_at;
  std::string updated_at;

  bool operator==(const Session&) const = default;
};

void to_json(nlohmann::json& j, const Session& s);
void from_json(const nlohmann::json& j, Session& s);

/// Provider failure while generating a reply. The participant message is
/// kept; the same reply can be requested again.
struct ReplyUnavailableError : Error {
  explicit ReplyUnavailableError(const std::string& w) : Error(ErrorKind::Transport, w) {}
};

using Clock = std::function<std::chrono::system_clock::time_point()>;

struct ServiceOptions {
  /// Sessions are persisted as one JSON file each; empty keeps them in
  /// memory only.
  std::filesystem::path storage_dir;
  std::chrono::minutes abandonment_timeout{30};
  std::chrono::milliseconds typing_delay{0};
  int max_attempts = 3;
  std::chrono::milliseconds request_timeout{60000};
  ExperimentConfig default_config = stage2_default_config();
  SurveyInstrument instrument = SurveyInstrument::shipped();
  DimensionSet dims = DimensionSet::default_us();
  std::string wizard_name = kWizardName;
  /// Seeds the wizard persona when the config does not provide one.
  std::uint64_t persona_seed = 2;
  std::optional<std::uint64_t> id_seed;  // reproducible session ids in tests
  Clock clock;          // defaults to the system clock
  Sleeper sleeper;      // defaults to real sleeping
  std::function<void(const std::string&)> alert;  // operator alerts
};

struct OpenResult {
  Session session;
  bool resumed = false;
};

struct ReplyResult {
  std::string reply;
  int turn_count = 0;
  int turn_limit = 0;
  bool final = false;
  SessionState state = SessionState::Active;
};

struct SurveyReceipt {
  std::string session_id;
  std::string completion_code;
  std::string submitted_at;
};

struct ExportFilter {
  std::optional<std::string> since;  // ISO date or timestamp, inclusive
  std::optional<std::string> until;  // inclusive of the whole day for a date
  bool include_partial = false;
};

struct SessionExport {
  std::vector<ConversationTranscript> transcripts;
  std::vector<SurveyResponse> surveys;
};

/// Converts a finished (or, for partial exports, unfinished) session into
/// the transcript format used for simulated runs.
ConversationTranscript session_transcript(const Session& s);

class SessionService {
 public:
  SessionService(std::shared_ptr<ChatGateway> chat, ServiceOptions opts = {});
  ~SessionService();
  SessionService(const SessionService&) = delete;
  SessionService& operator=(const SessionService&) = delete;

  /// Consent is required. A participant with a session in progress gets
  /// it back. A provider failure on the opening message leaves the
  /// session failed and raises an operator alert; retry() recovers it.
  OpenResult create_session(const ParticipantMeta& meta,
                            std::optional<ExperimentConfig> cfg = std::nullopt);

  ReplyResult post_participant_message(const std::string& session_id, const std::string& text);
  /// Regenerates the reply the participant is waiting for, or the opening
  /// message of a failed session.
  ReplyResult retry(const std::string& session_id);
  SurveyReceipt submit_survey(const std::string& session_id, SurveyResponse survey);

  Session get(const std::string& session_id) const;
  std::vector<std::string> session_ids() const;
  SessionExport export_sessions(const ExportFilter& filter = {}) const;

  /// Marks sessions idle longer than the timeout as abandoned.
  std::size_t sweep_abandoned();

  const ServiceOptions& options() const { return opts_; }
  std::vector<std::string> alerts() const;

 private:
  struct Entry {
    std::mutex mu;
    Session s;
  };

  std::shared_ptr<Entry> entry(const std::string& id) const;
  std::string now_iso() const;
  std::string new_id();
  void persist(const Session& s) const;
  void raise_alert(const std::string& msg);
  bool generate_wizard(Session& s, int turn, std::string& error);
  ReplyResult finish_reply(Session& s, int turn);
  void load_existing();

  std::shared_ptr<ChatGateway> chat_;
  ServiceOptions opts_;
  mutable std::mutex mu_;
  std::map<std::string, std::shared_ptr<Entry>> sessions_;
  std::map<std::string, std::string> by_participant_;
  mutable std::mutex alert_mu_;
  std::vector<std::string> alerts_;
  std::optional<Rng> id_rng_;
};

}  // namespace wozlab
