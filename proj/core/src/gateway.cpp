#include "wozlab/gateway.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <thread>

#include "wozlab/random.hpp"

namespace wozlab {

void ChatRequest::validate() const {
  if (!(temperature >= 0.0 && temperature <= 2.0))
    throw ValidationError("temperature " + std::to_string(temperature) + " outside [0, 2]");
  if (max_retries < 1) throw ValidationError("max_retries must allow at least one attempt");
  for (std::size_t i = 1; i < history.size(); ++i) {
    if (history[i].role == history[i - 1].role)
      throw ValidationError("chat history roles must alternate (position " + std::to_string(i) +
                            ")");
  }
}

Sleeper real_sleeper() {
  return [](std::chrono::milliseconds d) {
    if (d.count() > 0) std::this_thread::sleep_for(d);
  };
}

RequestLimiter::RequestLimiter(std::size_t max_in_flight, double requests_per_second)
    : max_in_flight_(std::max<std::size_t>(1, max_in_flight)) {
  if (requests_per_second > 0.0)
    interval_ = std::chrono::nanoseconds(static_cast<std::int64_t>(1e9 / requests_per_second));
}

RequestLimiter::Permit::~Permit() {
  if (owner_) owner_->release();
}

RequestLimiter::Permit RequestLimiter::acquire() {
  std::chrono::steady_clock::time_point start;
  {
    std::unique_lock lock(mu_);
    cv_.wait(lock, [&] { return in_flight_ < max_in_flight_; });
    ++in_flight_;
    const auto now = std::chrono::steady_clock::now();
    start = std::max(now, next_start_);
    next_start_ = start + interval_;
  }
  std::this_thread::sleep_until(start);
  return Permit(this);
}

void RequestLimiter::release() {
  {
    std::lock_guard lock(mu_);
    --in_flight_;
  }
  cv_.notify_one();
}

std::string content_hash(std::string_view text) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[40];
  std::snprintf(buf, sizeof buf, "%016llx-%zu", static_cast<unsigned long long>(h), text.size());
  return buf;
}

namespace {

std::chrono::milliseconds backoff_delay(const RetryPolicy& p, int failed_attempts,
                                        std::mutex& mu, std::uint64_t& state) {
  double base = static_cast<double>(p.initial_backoff.count()) *
                std::pow(p.multiplier, static_cast<double>(failed_attempts - 1));
  base = std::min(base, static_cast<double>(p.max_backoff.count()));
  double u;
  {
    std::lock_guard lock(mu);
    state = splitmix64(state);
    u = static_cast<double>(state >> 11) * 0x1.0p-53;
  }
  const double jittered = base * (1.0 + p.jitter * (2.0 * u - 1.0));
  return std::chrono::milliseconds(static_cast<std::int64_t>(std::max(0.0, jittered)));
}

struct RetryContext {
  const char* operation;
  int max_attempts;
  const GatewayOptions& opts;
  RequestLimiter& limiter;
  std::mutex& jitter_mu;
  std::uint64_t& jitter_state;
  std::string provider;
  std::string model;
};

void audit(const RetryContext& ctx, int attempt, std::chrono::milliseconds latency,
           const std::string& outcome, const std::string& payload = {}) {
  if (ctx.opts.audit)
    ctx.opts.audit({ctx.provider, ctx.model, ctx.operation, attempt, latency, outcome, payload});
}

// Runs `attempt_fn` until it succeeds or attempts run out. Transport
// failures back off exponentially; throttling waits at least retry-after.
template <class Fn>
auto with_retries(const RetryContext& ctx, Fn&& attempt_fn, int* attempts_used = nullptr)
    -> decltype(attempt_fn()) {
  const Sleeper sleep = ctx.opts.sleeper ? ctx.opts.sleeper : real_sleeper();
  std::vector<std::string> log;
  for (int attempt = 1;; ++attempt) {
    const auto t0 = std::chrono::steady_clock::now();
    auto elapsed = [&] {
      return std::chrono::duration_cast<std::chrono::milliseconds>(std::chrono::steady_clock::now() -
                                                                   t0);
    };
    try {
      auto permit = ctx.limiter.acquire();
      auto result = attempt_fn();
      if (attempts_used) *attempts_used = attempt;
      audit(ctx, attempt, elapsed(), "ok");
      return result;
    } catch (const ThrottlingError& e) {
      log.push_back("attempt " + std::to_string(attempt) + ": throttled: " + e.what());
      audit(ctx, attempt, elapsed(), "throttled", e.what());
      if (attempt >= ctx.max_attempts) throw;
      sleep(std::min(std::max(e.retry_after(),
                              backoff_delay(ctx.opts.retry, attempt, ctx.jitter_mu,
                                            ctx.jitter_state)),
                     ctx.opts.retry.max_retry_after));
    } catch (const TransportError& e) {
      log.push_back("attempt " + std::to_string(attempt) + ": " + e.what());
      audit(ctx, attempt, elapsed(), "transport_error", e.what());
      if (attempt >= ctx.max_attempts)
        throw TransportError(std::string(ctx.operation) + " failed after " +
                                 std::to_string(attempt) + " attempts: " + e.what(),
                             std::move(log));
      sleep(backoff_delay(ctx.opts.retry, attempt, ctx.jitter_mu, ctx.jitter_state));
    }
  }
}

}  // namespace

// ---- chat -----------------------------------------------------------------

ChatGateway::ChatGateway(std::shared_ptr<ChatBackend> backend, GatewayOptions opts)
    : backend_(std::move(backend)),
      opts_(std::move(opts)),
      limiter_(opts_.max_in_flight, opts_.requests_per_second),
      jitter_state_(opts_.jitter_seed) {
  if (!backend_) throw ConfigError("chat gateway needs a backend");
}

ChatResult ChatGateway::chat_complete(const ChatRequest& req) {
  req.validate();
  RetryContext ctx{"chat_complete", req.max_retries, opts_, limiter_, jitter_mu_, jitter_state_,
                   backend_->provider_id(), backend_->model_id()};
  const auto t0 = std::chrono::steady_clock::now();
  int attempts = 0;
  ChatResult r = with_retries(ctx, [&] { return backend_->complete_once(req); }, &attempts);
  r.attempt_count = attempts;
  r.latency =
      std::chrono::duration_cast<std::chrono::milliseconds>(std::chrono::steady_clock::now() - t0);
  if (r.provider_id.empty()) r.provider_id = backend_->provider_id();
  if (r.model_id.empty()) r.model_id = backend_->model_id();
  if (!r.refused && r.text.empty()) {
    r.refused = true;
    r.refusal_reason = "empty completion";
  }
  if (opts_.audit) {
    opts_.audit({r.provider_id, r.model_id, "chat_complete.payload", attempts, r.latency,
                 r.refused ? "refused" : "ok", r.raw_payload});
  }
  return r;
}

// ---- embeddings -----------------------------------------------------------

EmbeddingGateway::EmbeddingGateway(std::shared_ptr<EmbeddingBackend> backend, GatewayOptions opts,
                                   int max_attempts)
    : backend_(std::move(backend)),
      opts_(std::move(opts)),
      max_attempts_(max_attempts),
      limiter_(opts_.max_in_flight, opts_.requests_per_second),
      jitter_state_(opts_.jitter_seed) {
  if (!backend_) throw ConfigError("embedding gateway needs a backend");
  dimension_ = backend_->dimension();
}

void EmbeddingGateway::check_dimension(const Embedding& e) {
  std::lock_guard lock(dim_mu_);
  if (dimension_ == 0) dimension_ = e.size();
  if (e.size() != dimension_)
    throw IntegrityError("embedding dimension " + std::to_string(e.size()) +
                         " differs from the batch dimension " + std::to_string(dimension_));
}

Embedding EmbeddingGateway::embed(const std::string& text) {
  return embed_batch(std::span<const std::string>(&text, 1)).front();
}

std::vector<Embedding> EmbeddingGateway::embed_batch(std::span<const std::string> texts) {
  const std::string prefix = backend_->provider_id() + "|" + backend_->model_id() + "|";
  std::vector<Embedding> out(texts.size());
  std::vector<std::string> missing;
  std::vector<std::size_t> missing_pos;
  for (std::size_t i = 0; i < texts.size(); ++i) {
    if (auto hit = cache_.find(prefix + content_hash(texts[i]))) {
      out[i] = std::move(*hit);
    } else {
      missing.push_back(texts[i]);
      missing_pos.push_back(i);
    }
  }
  if (!missing.empty()) {
    RetryContext ctx{"embed", max_attempts_, opts_, limiter_, jitter_mu_, jitter_state_,
                     backend_->provider_id(), backend_->model_id()};
    auto fresh = with_retries(ctx, [&] {
      ++calls_;
      return backend_->embed_once(missing);
    });
    if (fresh.size() != missing.size())
      throw IntegrityError("embedding service returned " + std::to_string(fresh.size()) +
                           " vectors for " + std::to_string(missing.size()) + " texts");
    for (std::size_t k = 0; k < fresh.size(); ++k) {
      check_dimension(fresh[k]);
      cache_.put(prefix + content_hash(missing[k]), fresh[k]);
      out[missing_pos[k]] = std::move(fresh[k]);
    }
  }
  for (const auto& e : out) check_dimension(e);
  return out;
}

// ---- toxicity -------------------------------------------------------------

ToxicityGateway::ToxicityGateway(std::shared_ptr<ToxicityBackend> backend, GatewayOptions opts,
                                 int max_attempts)
    : backend_(std::move(backend)),
      opts_(std::move(opts)),
      max_attempts_(max_attempts),
      limiter_(opts_.max_in_flight, opts_.requests_per_second),
      jitter_state_(opts_.jitter_seed) {
  if (!backend_) throw ConfigError("toxicity gateway needs a backend");
}

double ToxicityGateway::score_toxicity(const std::string& text) {
  const std::string key =
      backend_->provider_id() + "|" + backend_->model_id() + "|" + content_hash(text);
  if (auto hit = cache_.find(key)) return *hit;
  RetryContext ctx{"score_toxicity", max_attempts_, opts_, limiter_, jitter_mu_, jitter_state_,
                   backend_->provider_id(), backend_->model_id()};
  const double s = with_retries(ctx, [&] {
    ++calls_;
    return backend_->score_once(text);
  });
  if (!(s >= 0.0 && s <= 1.0))
    throw IntegrityError("toxicity score " + std::to_string(s) + " outside [0, 1]");
  cache_.put(key, s);
  return s;
}

}  // namespace wozlab
