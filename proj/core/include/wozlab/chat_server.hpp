#pragma once

#include <chrono>
#include <memory>
#include <string>
#include <thread>

#include <nlohmann/json.hpp>

#include "wozlab/session.hpp"

namespace wozlab {

struct ServerOptions {
  std::string host = "127.0.0.1";
  int port = 8080;  // 0 picks a free port
  std::chrono::seconds sweep_interval{60};
  std::string allow_origin = "*";
};

/// Public view of a session for the participant client.
nlohmann::json session_view(const Session& s, std::chrono::milliseconds typing_delay);

/// JSON API over a SessionService:
///   POST /sessions                  {participant_id, consent, config?}
///   POST /sessions/{id}/messages    {text}
///   POST /sessions/{id}/retry
///   POST /sessions/{id}/survey      SurveyResponse
///   GET  /sessions/{id}
///   GET  /export[?since&until&include_partial]            transcript records
///   GET  /export/surveys[?since&until&include_partial]    survey records
///   GET  /instrument
///   GET  /health
class ChatServer {
 public:
  ChatServer(SessionService& service, ServerOptions opts = {});
  ~ChatServer();
  ChatServer(const ChatServer&) = delete;
  ChatServer& operator=(const ChatServer&) = delete;

  /// Binds and serves on a background thread. Returns the bound port.
  int start();
  /// Binds and serves on the calling thread until stop().
  void run();
  void stop();
  int port() const { return port_; }

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
  SessionService& service_;
  ServerOptions opts_;
  int port_ = 0;
  std::thread thread_;
  std::thread sweeper_;
};

/// HTTP status for an error category.
int http_status_for(ErrorKind kind);

}  // namespace wozlab
