#pragma once

#include <chrono>
#include <memory>
#include <string>

#include "wozlab/gateway.hpp"

namespace wozlab {

struct Endpoint {
  std::string base_url;  // scheme://host[:port][/path-prefix]
  std::string api_key;
  std::string model;
  std::chrono::milliseconds timeout{60000};
};

/// OpenAI-compatible chat completions: POST {base}/v1/chat/completions.
class OpenAiChatBackend final : public ChatBackend {
 public:
  explicit OpenAiChatBackend(Endpoint ep);
  ChatResult complete_once(const ChatRequest& req) override;
  std::string provider_id() const override { return "openai-compatible:" + ep_.base_url; }
  std::string model_id() const override { return ep_.model; }

 private:
  Endpoint ep_;
};

/// Embedding service: POST {base}/v1/embeddings with {"model", "input": [...]}
/// answering {"data": [{"embedding": [...]}, ...]}.
class HttpEmbeddingBackend final : public EmbeddingBackend {
 public:
  HttpEmbeddingBackend(Endpoint ep, std::size_t dimension);
  std::vector<Embedding> embed_once(std::span<const std::string> texts) override;
  std::size_t dimension() const override { return dimension_; }
  std::string provider_id() const override { return "embedding-http:" + ep_.base_url; }
  std::string model_id() const override { return ep_.model; }

 private:
  Endpoint ep_;
  std::size_t dimension_;
};

/// Perspective-compatible analyzer: POST {base}/v1alpha1/comments:analyze
/// requesting the TOXICITY attribute summary score.
class PerspectiveToxicityBackend final : public ToxicityBackend {
 public:
  explicit PerspectiveToxicityBackend(Endpoint ep);
  double score_once(const std::string& text) override;
  std::string provider_id() const override { return "perspective:" + ep_.base_url; }
  std::string model_id() const override { return ep_.model.empty() ? "TOXICITY" : ep_.model; }

 private:
  Endpoint ep_;
};

}  // namespace wozlab
