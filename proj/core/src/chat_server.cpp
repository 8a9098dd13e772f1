#include "wozlab/chat_server.hpp"

#include <condition_variable>
#include <mutex>

#include <httplib.h>

namespace wozlab {

namespace {

using nlohmann::json;

void send_json(httplib::Response& res, int status, const json& body) {
  res.status = status;
  res.set_content(body.dump(), "application/json");
}

void send_error(httplib::Response& res, int status, const std::string& kind,
                const std::string& message, json extra = json::object()) {
  extra["error"] = {{"kind", kind}, {"message", message}};
  send_json(res, status, extra);
}

json parse_body(const httplib::Request& req) {
  if (req.body.empty()) return json::object();
  try {
    return json::parse(req.body);
  } catch (const json::exception& e) {
    throw ValidationError(std::string("request body is not valid JSON: ") + e.what());
  }
}

ExportFilter filter_from(const httplib::Request& req) {
  ExportFilter f;
  if (req.has_param("since")) f.since = req.get_param_value("since");
  if (req.has_param("until")) f.until = req.get_param_value("until");
  if (req.has_param("include_partial")) {
    const auto v = req.get_param_value("include_partial");
    f.include_partial = v == "1" || v == "true" || v == "yes";
  }
  return f;
}

json reply_json(const ReplyResult& r, std::chrono::milliseconds delay) {
  return {{"reply", r.reply},          {"turn_count", r.turn_count},
          {"turn_limit", r.turn_limit}, {"final", r.final},
          {"state", to_string(r.state)}, {"typing_delay_ms", delay.count()}};
}

// Runs a handler, turning library errors into JSON error responses.
template <class F>
void guarded(httplib::Response& res, F&& f) {
  try {
    f();
  } catch (const ReplyUnavailableError& e) {
    send_error(res, http_status_for(e.kind()), to_string(e.kind()), e.what(),
               {{"retriable", true}});
  } catch (const Error& e) {
    send_error(res, http_status_for(e.kind()), to_string(e.kind()), e.what());
  } catch (const json::exception& e) {
    send_error(res, 400, "validation", e.what());
  } catch (const std::exception& e) {
    send_error(res, 500, "internal", e.what());
  }
}

}  // namespace

int http_status_for(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::Validation: return 400;
    case ErrorKind::NotFound: return 404;
    case ErrorKind::State:
    case ErrorKind::Conflict: return 409;
    case ErrorKind::UndefinedMetric:
    case ErrorKind::Analysis: return 422;
    case ErrorKind::Transport:
    case ErrorKind::Throttling: return 503;
    case ErrorKind::Config:
    case ErrorKind::Integrity: return 500;
  }
  return 500;
}

json session_view(const Session& s, std::chrono::milliseconds typing_delay) {
  json msgs = json::array();
  for (std::size_t i = 0; i < s.transcript.messages.size(); ++i) {
    const auto& m = s.transcript.messages[i];
    msgs.push_back({{"index", i},
                    {"speaker", to_string(m.speaker)},
                    {"turn", m.turn_index},
                    {"text", m.text},
                    {"timestamp", m.timestamp}});
  }
  json v = {{"session_id", s.session_id},
            {"state", to_string(s.state)},
            {"turn_count", s.turn_count},
            {"turn_limit", s.config.turn_limit},
            {"reply_pending", s.reply_pending},
            {"partner_name", s.config.wizard_persona.display_name},
            {"typing_delay_ms", typing_delay.count()},
            {"survey_submitted", s.survey.has_value()},
            {"messages", msgs},
            {"created_at", s.created_at},
            {"updated_at", s.updated_at}};
  if (!s.completion_code.empty()) v["completion_code"] = s.completion_code;
  if (!s.failure_reason.empty()) v["failure_reason"] = s.failure_reason;
  return v;
}

struct ChatServer::Impl {
  httplib::Server svr;
  std::mutex mu;
  std::condition_variable cv;
  bool stopping = false;
};

ChatServer::ChatServer(SessionService& service, ServerOptions opts)
    : impl_(std::make_unique<Impl>()), service_(service), opts_(std::move(opts)) {
  auto& svr = impl_->svr;
  const auto delay = service_.options().typing_delay;
  const std::string origin = opts_.allow_origin;

  svr.set_post_routing_handler([origin](const httplib::Request&, httplib::Response& res) {
    if (!origin.empty()) {
      res.set_header("Access-Control-Allow-Origin", origin);
      res.set_header("Access-Control-Allow-Headers", "Content-Type");
      res.set_header("Access-Control-Allow-Methods", "GET, POST, OPTIONS");
    }
  });
  svr.Options(R"(.*)", [](const httplib::Request&, httplib::Response& res) { res.status = 204; });

  svr.Get("/health", [](const httplib::Request&, httplib::Response& res) {
    send_json(res, 200, {{"status", "ok"}});
  });

  svr.Get("/instrument", [this](const httplib::Request&, httplib::Response& res) {
    send_json(res, 200, service_.options().instrument.raw);
  });

  svr.Post("/sessions", [this, delay](const httplib::Request& req, httplib::Response& res) {
    guarded(res, [&] {
      const json body = parse_body(req);
      ParticipantMeta meta;
      meta.participant_id = body.value("participant_id", "");
      meta.consent = body.value("consent", false);
      std::optional<ExperimentConfig> cfg;
      if (body.contains("config")) {
        json base = service_.options().default_config;
        base.merge_patch(body.at("config"));
        cfg = base.get<ExperimentConfig>();
      }
      const OpenResult r = service_.create_session(meta, cfg);
      json out = {{"session", session_view(r.session, delay)}, {"resumed", r.resumed}};
      const auto& msgs = r.session.transcript.messages;
      out["opening"] = msgs.empty() ? json(nullptr) : json(msgs.front().text);
      if (r.session.state == SessionState::Failed) {
        send_error(res, 502, "transport", r.session.failure_reason, out);
        return;
      }
      send_json(res, r.resumed ? 200 : 201, out);
    });
  });

  svr.Post(R"(/sessions/([^/]+)/messages)",
           [this, delay](const httplib::Request& req, httplib::Response& res) {
             guarded(res, [&] {
               const json body = parse_body(req);
               if (!body.contains("text") || !body.at("text").is_string())
                 throw ValidationError("'text' must be a string");
               const auto r = service_.post_participant_message(req.matches[1],
                                                                body.at("text").get<std::string>());
               send_json(res, 200, reply_json(r, delay));
             });
           });

  svr.Post(R"(/sessions/([^/]+)/retry)",
           [this, delay](const httplib::Request& req, httplib::Response& res) {
             guarded(res, [&] { send_json(res, 200, reply_json(service_.retry(req.matches[1]), delay)); });
           });

  svr.Post(R"(/sessions/([^/]+)/survey)",
           [this](const httplib::Request& req, httplib::Response& res) {
             guarded(res, [&] {
               const SurveyResponse s = parse_body(req).get<SurveyResponse>();
               const auto receipt = service_.submit_survey(req.matches[1], s);
               send_json(res, 201,
                         {{"session_id", receipt.session_id},
                          {"completion_code", receipt.completion_code},
                          {"submitted_at", receipt.submitted_at}});
             });
           });

  svr.Get(R"(/sessions/([^/]+))", [this, delay](const httplib::Request& req, httplib::Response& res) {
    guarded(res, [&] { send_json(res, 200, session_view(service_.get(req.matches[1]), delay)); });
  });

  svr.Get("/export", [this](const httplib::Request& req, httplib::Response& res) {
    guarded(res, [&] {
      const auto ex = service_.export_sessions(filter_from(req));
      std::string body;
      for (const auto& t : ex.transcripts) body += to_jsonl(t);
      res.status = 200;
      res.set_content(body, "application/x-ndjson");
    });
  });

  svr.Get("/export/surveys", [this](const httplib::Request& req, httplib::Response& res) {
    guarded(res, [&] {
      const auto ex = service_.export_sessions(filter_from(req));
      std::string body;
      for (const auto& s : ex.surveys) body += json(s).dump() + "\n";
      res.status = 200;
      res.set_content(body, "application/x-ndjson");
    });
  });
}

ChatServer::~ChatServer() { stop(); }

namespace {

int bind_server(httplib::Server& svr, const ServerOptions& o) {
  if (o.port == 0) {
    const int p = svr.bind_to_any_port(o.host);
    if (p <= 0) throw ConfigError("cannot bind " + o.host);
    return p;
  }
  if (!svr.bind_to_port(o.host, o.port))
    throw ConfigError("cannot bind " + o.host + ":" + std::to_string(o.port));
  return o.port;
}

}  // namespace

int ChatServer::start() {
  port_ = bind_server(impl_->svr, opts_);
  sweeper_ = std::thread([this] {
    std::unique_lock lock(impl_->mu);
    while (!impl_->cv.wait_for(lock, opts_.sweep_interval, [this] { return impl_->stopping; })) {
      lock.unlock();
      service_.sweep_abandoned();
      lock.lock();
    }
  });
  thread_ = std::thread([this] { impl_->svr.listen_after_bind(); });
  impl_->svr.wait_until_ready();
  return port_;
}

void ChatServer::run() {
  start();
  if (thread_.joinable()) thread_.join();
}

void ChatServer::stop() {
  {
    std::lock_guard lock(impl_->mu);
    impl_->stopping = true;
  }
  impl_->cv.notify_all();
  impl_->svr.stop();
  if (thread_.joinable() && thread_.get_id() != std::this_thread::get_id()) thread_.join();
  if (sweeper_.joinable()) sweeper_.join();
}

}  // namespace wozlab
