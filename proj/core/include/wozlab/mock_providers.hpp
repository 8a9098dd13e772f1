#pragma once

#include <functional>
#include <map>
#include <mutex>
#include <string>
#include <vector>

#include "wozlab/gateway.hpp"

namespace wozlab {

/// Chat backend driven by a caller-supplied script. Records every request.
class ScriptedChatBackend final : public ChatBackend {
 public:
  using Script = std::function<ChatResult(const ChatRequest&, int call_index)>;

  explicit ScriptedChatBackend(Script script, std::string id = "scripted");

  ChatResult complete_once(const ChatRequest& req) override;
  std::string provider_id() const override { return id_; }
  std::string model_id() const override { return "script"; }

  std::vector<ChatRequest> requests() const;
  int calls() const;

  static std::shared_ptr<ScriptedChatBackend> echo(std::string text);
  /// Throws TransportError on the first `failures` calls, then answers `text`.
  static std::shared_ptr<ScriptedChatBackend> failing_then(int failures, std::string text);
  static std::shared_ptr<ScriptedChatBackend> always_failing();

 private:
  Script script_;
  std::string id_;
  mutable std::mutex mu_;
  std::vector<ChatRequest> requests_;
  int calls_ = 0;
};

/// Offline stand-in for a chat model. Replies are composed from a phrase
/// bank, chosen by hashing the system prompt and visible history, so the
/// same request always yields the same text.
class MockConversationBackend final : public ChatBackend {
 public:
  explicit MockConversationBackend(std::uint64_t salt = 0);
  ChatResult complete_once(const ChatRequest& req) override;
  std::string provider_id() const override { return "mock-conversation"; }
  std::string model_id() const override { return "mock-v1"; }

 private:
  std::uint64_t salt_;
};

/// Signed feature hashing of lowercased word unigrams and bigrams plus a
/// constant bias component, L2-normalized. Never returns a zero vector.
class HashingEmbeddingBackend final : public EmbeddingBackend {
 public:
  explicit HashingEmbeddingBackend(std::size_t dimension = 384);
  std::vector<Embedding> embed_once(std::span<const std::string> texts) override;
  std::size_t dimension() const override { return dimension_; }
  std::string provider_id() const override { return "mock-hashing"; }
  std::string model_id() const override { return "hashing-" + std::to_string(dimension_); }

  Embedding embed_one(const std::string& text) const;

 private:
  std::size_t dimension_;
};

/// Toxicity scores from a fixed table; unknown texts get a small score
/// derived from a list of insult words.
class TableToxicityBackend final : public ToxicityBackend {
 public:
  explicit TableToxicityBackend(std::map<std::string, double> table = {},
                                double baseline = 0.01);
  double score_once(const std::string& text) override;
  std::string provider_id() const override { return "mock-toxicity"; }
  std::string model_id() const override { return "table-v1"; }

 private:
  std::map<std::string, double> table_;
  double baseline_;
};

}  // namespace wozlab
