#include "wozlab/session.hpp"

#include <algorithm>
#include <cctype>
#include <ctime>
#include <fstream>
#include <iomanip>
#include <random>
#include <sstream>

#include "wozlab/data_files.hpp"
#include "wozlab/prompts.hpp"

namespace wozlab {

namespace {

using nlohmann::json;

std::string format_iso(std::chrono::system_clock::time_point tp) {
  const std::time_t t = std::chrono::system_clock::to_time_t(tp);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

std::optional<std::chrono::system_clock::time_point> parse_iso(const std::string& s) {
  std::tm tm{};
  std::istringstream in(s);
  in >> std::get_time(&tm, "%Y-%m-%dT%H:%M:%S");
  if (in.fail()) return std::nullopt;
  return std::chrono::system_clock::from_time_t(timegm(&tm));
}

std::string trim(std::string_view s) {
  std::size_t b = 0, e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return std::string(s.substr(b, e - b));
}

std::vector<std::string> string_list(const json& j, const char* key) {
  if (!j.contains(key) || !j.at(key).is_array())
    throw ConfigError(std::string("survey instrument: '") + key + "' must be a list");
  auto v = j.at(key).get<std::vector<std::string>>();
  if (v.empty()) throw ConfigError(std::string("survey instrument: '") + key + "' is empty");
  return v;
}

void check_likert(const std::vector<int>& values, std::size_t expected, const char* field,
                  const SurveyInstrument& ins) {
  if (values.size() != expected)
    throw ValidationError(std::string(field) + " needs " + std::to_string(expected) +
                          " answers, got " + std::to_string(values.size()));
  for (std::size_t i = 0; i < values.size(); ++i)
    if (values[i] < ins.likert_min || values[i] > ins.likert_max)
      throw ValidationError(std::string(field) + "[" + std::to_string(i) + "] = " +
                            std::to_string(values[i]) + " is outside " +
                            std::to_string(ins.likert_min) + ".." + std::to_string(ins.likert_max));
}

bool resumable(SessionState s) {
  return s == SessionState::Active || s == SessionState::AwaitingSurvey ||
         s == SessionState::Failed;
}

bool persona_empty(const Persona& p) {
  for (auto d : kDimensionNames)
    if (!p.value(d).empty()) return false;
  return true;
}

ConversationTranscript transcript_from_records(const json& records) {
  std::stringstream ss;
  for (const auto& r : records) ss << r.dump() << "\n";
  auto ts = parse_transcripts(ss);
  if (ts.size() != 1) throw IntegrityError("session file must hold exactly one transcript");
  return std::move(ts.front());
}

}  // namespace

const char* to_string(SessionState s) {
  switch (s) {
    case SessionState::Active: return "active";
    case SessionState::AwaitingSurvey: return "awaiting_survey";
    case SessionState::Complete: return "complete";
    case SessionState::Abandoned: return "abandoned";
    case SessionState::Failed: return "failed";
  }
  return "active";
}

SessionState session_state_from_string(const std::string& s) {
  for (auto st : {SessionState::Active, SessionState::AwaitingSurvey, SessionState::Complete,
                  SessionState::Abandoned, SessionState::Failed})
    if (s == to_string(st)) return st;
  throw ValidationError("unknown session state '" + s + "'");
}

SurveyInstrument SurveyInstrument::from_json(const json& j) {
  SurveyInstrument ins;
  try {
    ins.version = j.value("instrument", "unnamed");
    ins.placeholder = j.value("placeholder", false);
    if (j.contains("likert")) {
      ins.likert_min = j.at("likert").value("min", 1);
      ins.likert_max = j.at("likert").value("max", 5);
    }
    const json& scales = j.at("scales");
    ins.rapport_items = string_list(scales, "rapport");
    ins.partner_impression_items = string_list(scales, "partner_impression");
    ins.quality_items = string_list(scales, "quality");
    ins.bot_identity_options = string_list(j, "perceived_bot_identity");
  } catch (const json::exception& e) {
    throw ConfigError(std::string("survey instrument: ") + e.what());
  }
  if (ins.likert_min >= ins.likert_max) throw ConfigError("survey instrument: empty Likert range");
  ins.raw = j;
  return ins;
}

SurveyInstrument SurveyInstrument::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open survey instrument " + path.string());
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw ConfigError("survey instrument " + path.string() + ": " + e.what());
  }
  return from_json(j);
}

const SurveyInstrument& SurveyInstrument::shipped() {
  static const SurveyInstrument ins = load(data_file("survey_instrument.json"));
  return ins;
}

void to_json(json& j, const SurveyResponse& s) {
  j = {{"session_id", s.session_id},
       {"rapport_items", s.rapport_items},
       {"partner_impression_items", s.partner_impression_items},
       {"quality_items", s.quality_items},
       {"perceived_bot_identity", s.perceived_bot_identity},
       {"open_feedback", s.open_feedback},
       {"demographics", s.demographics},
       {"submitted_at", s.submitted_at}};
}

void from_json(const json& j, SurveyResponse& s) {
  try {
    s.session_id = j.value("session_id", "");
    s.rapport_items = j.at("rapport_items").get<std::vector<int>>();
    s.partner_impression_items = j.at("partner_impression_items").get<std::vector<int>>();
    s.quality_items = j.at("quality_items").get<std::vector<int>>();
    s.perceived_bot_identity = j.at("perceived_bot_identity").get<std::string>();
    s.open_feedback = j.value("open_feedback", "");
    s.demographics = j.at("demographics").get<Persona>();
    s.submitted_at = j.value("submitted_at", "");
  } catch (const json::exception& e) {
    throw ValidationError(std::string("malformed survey: ") + e.what());
  }
}

void validate_survey(const SurveyResponse& s, const SurveyInstrument& ins,
                     const DimensionSet& dims) {
  check_likert(s.rapport_items, ins.rapport_items.size(), "rapport_items", ins);
  check_likert(s.partner_impression_items, ins.partner_impression_items.size(),
               "partner_impression_items", ins);
  check_likert(s.quality_items, ins.quality_items.size(), "quality_items", ins);
  const auto& opts = ins.bot_identity_options;
  if (std::find(opts.begin(), opts.end(), s.perceived_bot_identity) == opts.end())
    throw ValidationError("perceived_bot_identity '" + s.perceived_bot_identity +
                          "' is not an instrument option");
  for (auto d : kDimensionNames)
    if (s.demographics.value(d).empty())
      throw ValidationError("demographics." + std::string(d) + " is missing");
  dims.check_persona(s.demographics);
}

void to_json(json& j, const Session& s) {
  j = {{"session_id", s.session_id},
       {"participant", {{"participant_id", s.participant.participant_id},
                        {"consent", s.participant.consent}}},
       {"config", s.config},
       {"transcript", to_records(s.transcript)},
       {"turn_count", s.turn_count},
       {"state", to_string(s.state)},
       {"reply_pending", s.reply_pending},
       {"failure_reason", s.failure_reason},
       {"completion_code", s.completion_code},
       {"created_at", s.created_at},
       {"updated_at", s.updated_at}};
  j["survey"] = s.survey ? json(*s.survey) : json(nullptr);
}

void from_json(const json& j, Session& s) {
  try {
    s.session_id = j.at("session_id").get<std::string>();
    s.participant.participant_id = j.at("participant").at("participant_id").get<std::string>();
    s.participant.consent = j.at("participant").at("consent").get<bool>();
    s.config = j.at("config").get<ExperimentConfig>();
    s.transcript = transcript_from_records(j.at("transcript"));
    s.turn_count = j.at("turn_count").get<int>();
    s.state = session_state_from_string(j.at("state").get<std::string>());
    s.reply_pending = j.value("reply_pending", false);
    s.failure_reason = j.value("failure_reason", "");
    s.completion_code = j.value("completion_code", "");
    s.created_at = j.at("created_at").get<std::string>();
    s.updated_at = j.at("updated_at").get<std::string>();
    if (j.contains("survey") && !j.at("survey").is_null())
      s.survey = j.at("survey").get<SurveyResponse>();
  } catch (const json::exception& e) {
    throw IntegrityError(std::string("malformed session record: ") + e.what());
  }
}

ConversationTranscript session_transcript(const Session& s) {
  ConversationTranscript t = s.transcript;
  t.transcript_id = s.session_id;
  t.stage = Stage::Human;
  t.config = s.config;
  t.config.stage = Stage::Human;
  if (s.survey) t.config.simulacrum_persona = s.survey->demographics;
  if (s.state == SessionState::Complete) {
    t.status = TranscriptStatus::Complete;
    t.failure_reason.clear();
  } else {
    t.status = TranscriptStatus::Failed;
    t.failure_reason = std::string("session ") + to_string(s.state) + " after " +
                       std::to_string(s.turn_count) + " of " +
                       std::to_string(s.config.turn_limit) + " turns";
    if (!s.failure_reason.empty()) t.failure_reason += ": " + s.failure_reason;
  }
  if (s.reply_pending) t.notes.push_back("last participant message has no reply");
  return t;
}

SessionService::SessionService(std::shared_ptr<ChatGateway> chat, ServiceOptions opts)
    : chat_(std::move(chat)), opts_(std::move(opts)) {
  if (!chat_) throw ConfigError("session service needs a chat gateway");
  if (!opts_.clock) opts_.clock = [] { return std::chrono::system_clock::now(); };
  if (!opts_.sleeper) opts_.sleeper = real_sleeper();
  id_rng_.emplace(opts_.id_seed ? *opts_.id_seed : std::random_device{}() ^
                                                       (static_cast<std::uint64_t>(std::random_device{}()) << 32));
  if (!opts_.storage_dir.empty()) {
    std::filesystem::create_directories(opts_.storage_dir);
    load_existing();
  }
}

SessionService::~SessionService() = default;

void SessionService::load_existing() {
  std::vector<std::filesystem::path> files;
  for (const auto& e : std::filesystem::directory_iterator(opts_.storage_dir))
    if (e.is_regular_file() && e.path().extension() == ".json") files.push_back(e.path());
  std::sort(files.begin(), files.end());
  for (const auto& f : files) {
    std::ifstream in(f);
    json j;
    try {
      in >> j;
    } catch (const json::exception& e) {
      throw IntegrityError("session file " + f.string() + ": " + e.what());
    }
    auto entry = std::make_shared<Entry>();
    entry->s = j.get<Session>();
    const auto& s = entry->s;
    auto it = by_participant_.find(s.participant.participant_id);
    if (it == by_participant_.end() || sessions_.at(it->second)->s.created_at <= s.created_at)
      by_participant_[s.participant.participant_id] = s.session_id;
    sessions_[s.session_id] = std::move(entry);
  }
}

std::string SessionService::now_iso() const { return format_iso(opts_.clock()); }

std::string SessionService::new_id() {
  char buf[40];
  std::snprintf(buf, sizeof buf, "s-%016llx%016llx",
                static_cast<unsigned long long>(id_rng_->next_u64()),
                static_cast<unsigned long long>(id_rng_->next_u64()));
  return buf;
}

void SessionService::persist(const Session& s) const {
  if (opts_.storage_dir.empty()) return;
  const auto final_path = opts_.storage_dir / (s.session_id + ".json");
  const auto tmp = opts_.storage_dir / (s.session_id + ".json.tmp");
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw ConfigError("cannot write session file " + tmp.string());
    out << json(s).dump(2) << "\n";
    out.flush();
    if (!out) throw ConfigError("failed writing session file " + tmp.string());
  }
  std::filesystem::rename(tmp, final_path);
}

void SessionService::raise_alert(const std::string& msg) {
  {
    std::lock_guard lock(alert_mu_);
    alerts_.push_back(msg);
  }
  if (opts_.alert) opts_.alert(msg);
}

std::vector<std::string> SessionService::alerts() const {
  std::lock_guard lock(alert_mu_);
  return alerts_;
}

std::shared_ptr<SessionService::Entry> SessionService::entry(const std::string& id) const {
  std::lock_guard lock(mu_);
  auto it = sessions_.find(id);
  if (it == sessions_.end()) throw NotFoundError("no session '" + id + "'");
  return it->second;
}

bool SessionService::generate_wizard(Session& s, int turn, std::string& error) {
  ChatRequest req;
  req.system_prompt = assemble_wizard_prompt(s.config, s.config.wizard_persona).text;
  req.history = history_for(Speaker::Wizard, s.transcript.messages);
  req.temperature = s.config.wizard_temperature;
  req.max_retries = opts_.max_attempts;
  req.timeout = opts_.request_timeout;
  ChatResult r;
  try {
    r = chat_->chat_complete(req);
  } catch (const Error& e) {
    error = std::string("provider failure: ") + e.what();
    return false;
  }
  if (r.refused) {
    error = "provider refused: " + (r.refusal_reason.empty() ? std::string("declined") : r.refusal_reason);
    return false;
  }
  if (opts_.typing_delay.count() > 0) opts_.sleeper(opts_.typing_delay);
  s.transcript.messages.push_back({Speaker::Wizard, turn, std::move(r.text), now_iso()});
  return true;
}

OpenResult SessionService::create_session(const ParticipantMeta& meta,
                                          std::optional<ExperimentConfig> cfg) {
  if (!meta.consent) throw ValidationError("participant consent is required");
  if (meta.participant_id.empty()) throw ValidationError("participant id is required");

  std::shared_ptr<Entry> existing;
  {
    std::lock_guard lock(mu_);
    auto it = by_participant_.find(meta.participant_id);
    if (it != by_participant_.end()) existing = sessions_.at(it->second);
  }
  if (existing) {
    std::lock_guard lock(existing->mu);
    if (resumable(existing->s.state)) return {existing->s, true};
  }

  ExperimentConfig c = cfg.value_or(opts_.default_config);
  c.stage = Stage::Human;
  if (persona_empty(c.wizard_persona)) {
    const std::string name = c.wizard_persona.display_name;
    c.wizard_persona = sample_persona(opts_.dims.dimensions(), opts_.persona_seed,
                                      name.empty() ? opts_.wizard_name : name);
  }
  if (c.wizard_persona.display_name.empty()) c.wizard_persona.display_name = opts_.wizard_name;
  c = c.coupled();
  c.validate();
  (void)assemble_wizard_prompt(c, c.wizard_persona);

  auto e = std::make_shared<Entry>();
  std::unique_lock session_lock(e->mu);
  {
    std::lock_guard lock(mu_);
    e->s.session_id = new_id();
    sessions_[e->s.session_id] = e;
    by_participant_[meta.participant_id] = e->s.session_id;
  }
  Session& s = e->s;
  s.participant = meta;
  s.config = c;
  s.transcript.transcript_id = s.session_id;
  s.transcript.config = c;
  s.transcript.stage = Stage::Human;
  s.created_at = s.updated_at = now_iso();

  std::string error;
  if (!generate_wizard(s, 0, error)) {
    s.state = SessionState::Failed;
    s.failure_reason = "opening message: " + error;
    raise_alert("session " + s.session_id + " failed to start: " + error);
  }
  s.updated_at = now_iso();
  persist(s);
  return {s, false};
}

ReplyResult SessionService::finish_reply(Session& s, int turn) {
  std::string error;
  if (!generate_wizard(s, turn, error)) {
    s.failure_reason = error;
    s.updated_at = now_iso();
    persist(s);
    raise_alert("session " + s.session_id + " reply at turn " + std::to_string(turn) +
                " failed: " + error);
    throw ReplyUnavailableError("reply unavailable, retry later: " + error);
  }
  s.reply_pending = false;
  s.failure_reason.clear();
  s.turn_count = turn;
  ReplyResult r;
  r.reply = s.transcript.messages.back().text;
  r.turn_count = s.turn_count;
  r.turn_limit = s.config.turn_limit;
  if (s.turn_count >= s.config.turn_limit) {
    s.state = SessionState::AwaitingSurvey;
    r.final = true;
  }
  r.state = s.state;
  s.updated_at = now_iso();
  persist(s);
  return r;
}

ReplyResult SessionService::post_participant_message(const std::string& session_id,
                                                     const std::string& text) {
  auto e = entry(session_id);
  std::lock_guard lock(e->mu);
  Session& s = e->s;
  if (s.state != SessionState::Active)
    throw StateError("session " + session_id + " is " + to_string(s.state) +
                     "; messages are accepted only while it is active");
  if (s.reply_pending)
    throw ConflictError("the previous message is still waiting for a reply; retry it first");
  const std::string body = trim(text);
  if (body.empty()) throw ValidationError("message is empty");
  const int turn = s.turn_count + 1;
  s.transcript.messages.push_back({Speaker::Participant, turn, body, now_iso()});
  s.reply_pending = true;
  s.updated_at = now_iso();
  persist(s);
  return finish_reply(s, turn);
}

ReplyResult SessionService::retry(const std::string& session_id) {
  auto e = entry(session_id);
  std::lock_guard lock(e->mu);
  Session& s = e->s;
  if (s.state == SessionState::Failed && s.transcript.messages.empty()) {
    std::string error;
    if (!generate_wizard(s, 0, error)) {
      s.failure_reason = "opening message: " + error;
      s.updated_at = now_iso();
      persist(s);
      throw ReplyUnavailableError("opening message unavailable, retry later: " + error);
    }
    s.state = SessionState::Active;
    s.failure_reason.clear();
    s.updated_at = now_iso();
    persist(s);
    return {s.transcript.messages.back().text, 0, s.config.turn_limit, false, s.state};
  }
  if (s.state == SessionState::Active && s.reply_pending) return finish_reply(s, s.turn_count + 1);
  throw StateError("session " + session_id + " has no reply to retry");
}

SurveyReceipt SessionService::submit_survey(const std::string& session_id, SurveyResponse survey) {
  auto e = entry(session_id);
  std::lock_guard lock(e->mu);
  Session& s = e->s;
  if (s.survey || s.state == SessionState::Complete)
    throw ConflictError("a survey was already submitted for session " + session_id);
  if (s.state != SessionState::AwaitingSurvey)
    throw StateError("the survey opens after turn " + std::to_string(s.config.turn_limit) +
                     "; session " + session_id + " is " + to_string(s.state) + " at turn " +
                     std::to_string(s.turn_count));
  if (!survey.session_id.empty() && survey.session_id != session_id)
    throw ValidationError("survey belongs to session '" + survey.session_id + "'");
  survey.session_id = session_id;
  validate_survey(survey, opts_.instrument, opts_.dims);
  survey.submitted_at = now_iso();

  s.survey = survey;
  s.config.simulacrum_persona = survey.demographics;
  s.transcript.config = s.config;
  std::string code = content_hash(session_id + "|" + survey.submitted_at).substr(0, 10);
  for (auto& ch : code) ch = static_cast<char>(std::toupper(static_cast<unsigned char>(ch)));
  s.completion_code = code;
  s.state = SessionState::Complete;
  s.updated_at = survey.submitted_at;
  persist(s);
  return {session_id, s.completion_code, survey.submitted_at};
}

Session SessionService::get(const std::string& session_id) const {
  auto e = entry(session_id);
  std::lock_guard lock(e->mu);
  return e->s;
}

std::vector<std::string> SessionService::session_ids() const {
  std::lock_guard lock(mu_);
  std::vector<std::string> ids;
  for (const auto& [id, e] : sessions_) ids.push_back(id);
  return ids;
}

std::size_t SessionService::sweep_abandoned() {
  std::vector<std::shared_ptr<Entry>> all;
  {
    std::lock_guard lock(mu_);
    for (const auto& [id, e] : sessions_) all.push_back(e);
  }
  const auto now = opts_.clock();
  std::size_t marked = 0;
  for (auto& e : all) {
    std::lock_guard lock(e->mu);
    Session& s = e->s;
    if (s.state != SessionState::Active && s.state != SessionState::AwaitingSurvey) continue;
    const auto last = parse_iso(s.updated_at);
    if (!last || now - *last < opts_.abandonment_timeout) continue;
    s.state = SessionState::Abandoned;
    s.updated_at = now_iso();
    persist(s);
    ++marked;
  }
  return marked;
}

SessionExport SessionService::export_sessions(const ExportFilter& filter) const {
  std::vector<Session> picked;
  {
    std::vector<std::shared_ptr<Entry>> all;
    {
      std::lock_guard lock(mu_);
      for (const auto& [id, e] : sessions_) all.push_back(e);
    }
    for (auto& e : all) {
      std::lock_guard lock(e->mu);
      const Session& s = e->s;
      if (s.state != SessionState::Complete && !filter.include_partial) continue;
      if (filter.since && s.created_at < *filter.since) continue;
      if (filter.until) {
        const bool date_only = filter.until->size() == 10;
        const std::string key = date_only ? s.created_at.substr(0, 10) : s.created_at;
        if (key > *filter.until) continue;
      }
      picked.push_back(s);
    }
  }
  std::sort(picked.begin(), picked.end(), [](const Session& a, const Session& b) {
    if (a.created_at != b.created_at) return a.created_at < b.created_at;
    return a.session_id < b.session_id;
  });
  SessionExport out;
  for (const auto& s : picked) {
    out.transcripts.push_back(session_transcript(s));
    if (s.survey) out.surveys.push_back(*s.survey);
  }
  return out;
}

}  // namespace wozlab
