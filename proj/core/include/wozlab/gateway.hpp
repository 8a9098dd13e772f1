#pragma once

#include <atomic>
#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "wozlab/error.hpp"

namespace wozlab {

// ---- errors ---------------------------------------------------------------

/// Raised after every permitted attempt failed. Carries one line per attempt.
class TransportError : public Error {
 public:
  TransportError(const std::string& what, std::vector<std::string> attempt_log = {})
      : Error(ErrorKind::Transport, what), attempt_log_(std::move(attempt_log)) {}
  const std::vector<std::string>& attempt_log() const { return attempt_log_; }

 private:
  std::vector<std::string> attempt_log_;
};

class ThrottlingError : public Error {
 public:
  ThrottlingError(const std::string& what, std::chrono::milliseconds retry_after)
      : Error(ErrorKind::Throttling, what), retry_after_(retry_after) {}
  std::chrono::milliseconds retry_after() const { return retry_after_; }

 private:
  std::chrono::milliseconds retry_after_;
};

// ---- chat -----------------------------------------------------------------

enum class ChatRole { User, Assistant };

struct ChatTurn {
  ChatRole role;
  std::string text;
};

struct ChatRequest {
  std::string system_prompt;
  std::vector<ChatTurn> history;
  double temperature = 1.0;
  int max_retries = 3;  // total attempts
  std::chrono::milliseconds timeout{60000};

  /// Temperature in [0, 2]; history roles strictly alternate.
  void validate() const;
};

struct ChatResult {
  std::string text;
  bool refused = false;
  std::string refusal_reason;
  std::chrono::milliseconds latency{0};
  int attempt_count = 0;
  std::string provider_id;
  std::string model_id;
  std::string raw_payload;
};

/// One attempt against a chat service. Throws TransportError or
/// ThrottlingError on failure; refusals come back as results.
class ChatBackend {
 public:
  virtual ~ChatBackend() = default;
  virtual ChatResult complete_once(const ChatRequest& req) = 0;
  virtual std::string provider_id() const = 0;
  virtual std::string model_id() const = 0;
};

// ---- embeddings / toxicity ---------------------------------------------------

using Embedding = std::vector<float>;

class EmbeddingBackend {
 public:
  virtual ~EmbeddingBackend() = default;
  virtual std::vector<Embedding> embed_once(std::span<const std::string> texts) = 0;
  /// Declared vector dimension; 0 if only known after the first response.
  virtual std::size_t dimension() const = 0;
  virtual std::string provider_id() const = 0;
  virtual std::string model_id() const = 0;
};

class ToxicityBackend {
 public:
  virtual ~ToxicityBackend() = default;
  virtual double score_once(const std::string& text) = 0;
  virtual std::string provider_id() const = 0;
  virtual std::string model_id() const = 0;
};

// ---- shared machinery -----------------------------------------------------

struct RetryPolicy {
  std::chrono::milliseconds initial_backoff{500};
  double multiplier = 2.0;
  std::chrono::milliseconds max_backoff{30000};
  double jitter = 0.2;  // fraction of the delay, applied symmetrically
  std::chrono::milliseconds max_retry_after{60000};
};

using Sleeper = std::function<void(std::chrono::milliseconds)>;
Sleeper real_sleeper();

/// Caps concurrent in-flight requests and spaces request starts to at most
/// `requests_per_second` (0 disables rate limiting).
class RequestLimiter {
 public:
  explicit RequestLimiter(std::size_t max_in_flight = 8, double requests_per_second = 0.0);

  class Permit {
   public:
    explicit Permit(RequestLimiter* owner) : owner_(owner) {}
    Permit(Permit&& o) noexcept : owner_(std::exchange(o.owner_, nullptr)) {}
    Permit(const Permit&) = delete;
    Permit& operator=(const Permit&) = delete;
    Permit& operator=(Permit&&) = delete;
    ~Permit();

   private:
    RequestLimiter* owner_;
  };

  Permit acquire();

 private:
  void release();

  std::mutex mu_;
  std::condition_variable cv_;
  std::size_t max_in_flight_;
  std::size_t in_flight_ = 0;
  std::chrono::nanoseconds interval_{0};
  std::chrono::steady_clock::time_point next_start_{};
};

/// 64-bit FNV-1a over the content, hex encoded with the byte length appended.
std::string content_hash(std::string_view text);

template <class Value>
class ContentCache {
 public:
  std::optional<Value> find(const std::string& key) const {
    std::lock_guard lock(mu_);
    auto it = entries_.find(key);
    if (it == entries_.end()) return std::nullopt;
    return it->second;
  }
  void put(const std::string& key, Value v) {
    std::lock_guard lock(mu_);
    entries_.insert_or_assign(key, std::move(v));
  }
  std::size_t size() const {
    std::lock_guard lock(mu_);
    return entries_.size();
  }

 private:
  mutable std::mutex mu_;
  std::unordered_map<std::string, Value> entries_;
};

struct AuditEntry {
  std::string provider_id;
  std::string model_id;
  std::string operation;
  int attempt = 0;
  std::chrono::milliseconds latency{0};
  std::string outcome;
  std::string payload;
};
using AuditSink = std::function<void(const AuditEntry&)>;

struct GatewayOptions {
  RetryPolicy retry;
  std::size_t max_in_flight = 8;
  double requests_per_second = 0.0;
  std::uint64_t jitter_seed = 0x5eedULL;
  Sleeper sleeper;  // defaults to real sleeping
  AuditSink audit;  // optional
};

// ---- gateways -------------------------------------------------------------

class ChatGateway {
 public:
  ChatGateway(std::shared_ptr<ChatBackend> backend, GatewayOptions opts = {});

  /// Retries transport failures with exponential backoff and jitter up to
  /// req.max_retries attempts. Empty completions come back as refusals.
  ChatResult chat_complete(const ChatRequest& req);

  std::string provider_id() const { return backend_->provider_id(); }
  std::string model_id() const { return backend_->model_id(); }

 private:
  std::shared_ptr<ChatBackend> backend_;
  GatewayOptions opts_;
  RequestLimiter limiter_;
  std::mutex jitter_mu_;
  std::uint64_t jitter_state_;

};

class EmbeddingGateway {
 public:
  EmbeddingGateway(std::shared_ptr<EmbeddingBackend> backend, GatewayOptions opts = {},
                   int max_attempts = 3);

  Embedding embed(const std::string& text);
  /// One vector per text, all of one dimension; IntegrityError otherwise.
  std::vector<Embedding> embed_batch(std::span<const std::string> texts);

  std::size_t backend_calls() const { return calls_; }
  std::string provider_id() const { return backend_->provider_id(); }
  std::string model_id() const { return backend_->model_id(); }

 private:
  std::shared_ptr<EmbeddingBackend> backend_;
  GatewayOptions opts_;
  int max_attempts_;
  RequestLimiter limiter_;
  ContentCache<Embedding> cache_;
  std::mutex dim_mu_;
  std::size_t dimension_ = 0;
  std::atomic<std::size_t> calls_{0};
  std::mutex jitter_mu_;
  std::uint64_t jitter_state_;

  void check_dimension(const Embedding& e);
};

class ToxicityGateway {
 public:
  ToxicityGateway(std::shared_ptr<ToxicityBackend> backend, GatewayOptions opts = {},
                  int max_attempts = 3);

  /// Score in [0, 1], cached by (provider, model, content hash).
  double score_toxicity(const std::string& text);

  std::size_t backend_calls() const { return calls_; }
  std::string provider_id() const { return backend_->provider_id(); }
  std::string model_id() const { return backend_->model_id(); }

 private:
  std::shared_ptr<ToxicityBackend> backend_;
  GatewayOptions opts_;
  int max_attempts_;
  RequestLimiter limiter_;
  ContentCache<double> cache_;
  std::atomic<std::size_t> calls_{0};
  std::mutex jitter_mu_;
  std::uint64_t jitter_state_;
};

/// Bundles the three services a run depends on.
struct Providers {
  std::shared_ptr<ChatGateway> chat;
  std::shared_ptr<EmbeddingGateway> embedding;
  std::shared_ptr<ToxicityGateway> toxicity;
};

}  // namespace wozlab
