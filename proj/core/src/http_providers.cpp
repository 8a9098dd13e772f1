#include "wozlab/http_providers.hpp"

#include <httplib.h>

#include <nlohmann/json.hpp>

namespace wozlab {

namespace {

using nlohmann::json;

struct SplitUrl {
  std::string origin;  // scheme://host:port
  std::string prefix;  // path without trailing slash
};

SplitUrl split_url(const std::string& url) {
  const auto scheme_end = url.find("://");
  if (scheme_end == std::string::npos) throw ConfigError("endpoint URL lacks a scheme: " + url);
  const auto path_start = url.find('/', scheme_end + 3);
  SplitUrl s;
  if (path_start == std::string::npos) {
    s.origin = url;
  } else {
    s.origin = url.substr(0, path_start);
    s.prefix = url.substr(path_start);
    while (!s.prefix.empty() && s.prefix.back() == '/') s.prefix.pop_back();
  }
  return s;
}

std::chrono::milliseconds parse_retry_after(const httplib::Response& res) {
  if (!res.has_header("Retry-After")) return std::chrono::milliseconds(1000);
  try {
    return std::chrono::milliseconds(
        static_cast<std::int64_t>(std::stod(res.get_header_value("Retry-After")) * 1000.0));
  } catch (...) {
    return std::chrono::milliseconds(1000);
  }
}

// One POST; maps transport problems onto the gateway's error types.
json post_json(const Endpoint& ep, const std::string& path, const json& body,
               const httplib::Headers& headers) {
  const auto url = split_url(ep.base_url);
  httplib::Client cli(url.origin);
  const auto secs = std::chrono::duration_cast<std::chrono::seconds>(ep.timeout).count();
  const auto usecs =
      std::chrono::duration_cast<std::chrono::microseconds>(ep.timeout).count() % 1000000;
  cli.set_connection_timeout(secs, usecs);
  cli.set_read_timeout(secs, usecs);
  cli.set_write_timeout(secs, usecs);
  auto res = cli.Post(url.prefix + path, headers, body.dump(), "application/json");
  if (!res) throw TransportError("request to " + ep.base_url + path + " failed: " +
                                 httplib::to_string(res.error()));
  if (res->status == 429)
    throw ThrottlingError("quota exceeded at " + ep.base_url, parse_retry_after(*res));
  if (res->status < 200 || res->status >= 300)
    throw TransportError("HTTP " + std::to_string(res->status) + " from " + ep.base_url + path +
                         ": " + res->body.substr(0, 200));
  try {
    return json::parse(res->body);
  } catch (const json::exception& e) {
    throw TransportError(std::string("unparseable response body: ") + e.what());
  }
}

httplib::Headers bearer(const Endpoint& ep) {
  httplib::Headers h;
  if (!ep.api_key.empty()) h.emplace("Authorization", "Bearer " + ep.api_key);
  return h;
}

}  // namespace

OpenAiChatBackend::OpenAiChatBackend(Endpoint ep) : ep_(std::move(ep)) {
  if (ep_.base_url.empty()) throw ConfigError("chat endpoint URL is not configured");
}

ChatResult OpenAiChatBackend::complete_once(const ChatRequest& req) {
  json messages = json::array();
  messages.push_back({{"role", "system"}, {"content", req.system_prompt}});
  for (const auto& t : req.history)
    messages.push_back(
        {{"role", t.role == ChatRole::User ? "user" : "assistant"}, {"content", t.text}});
  json body{{"model", ep_.model}, {"messages", messages}, {"temperature", req.temperature}};
  Endpoint ep = ep_;
  ep.timeout = std::min(ep_.timeout, req.timeout);
  const json res = post_json(ep, "/v1/chat/completions", body, bearer(ep_));

  ChatResult r;
  r.raw_payload = res.dump();
  r.provider_id = provider_id();
  r.model_id = ep_.model;
  if (!res.contains("choices") || res["choices"].empty())
    throw TransportError("chat response has no choices");
  const auto& choice = res["choices"][0];
  const auto& msg = choice.value("message", json::object());
  const std::string finish = choice.value("finish_reason", std::string{});
  if (msg.contains("refusal") && msg["refusal"].is_string()) {
    r.refused = true;
    r.refusal_reason = msg["refusal"].get<std::string>();
  } else if (finish == "content_filter") {
    r.refused = true;
    r.refusal_reason = "content_filter";
  }
  if (msg.contains("content") && msg["content"].is_string()) r.text = msg["content"];
  return r;
}

HttpEmbeddingBackend::HttpEmbeddingBackend(Endpoint ep, std::size_t dimension)
    : ep_(std::move(ep)), dimension_(dimension) {
  if (ep_.base_url.empty()) throw ConfigError("embedding endpoint URL is not configured");
}

std::vector<Embedding> HttpEmbeddingBackend::embed_once(std::span<const std::string> texts) {
  json body{{"model", ep_.model}, {"input", std::vector<std::string>(texts.begin(), texts.end())}};
  const json res = post_json(ep_, "/v1/embeddings", body, bearer(ep_));
  std::vector<Embedding> out;
  for (const auto& d : res.at("data")) out.push_back(d.at("embedding").get<Embedding>());
  return out;
}

PerspectiveToxicityBackend::PerspectiveToxicityBackend(Endpoint ep) : ep_(std::move(ep)) {
  if (ep_.base_url.empty()) throw ConfigError("toxicity endpoint URL is not configured");
}

double PerspectiveToxicityBackend::score_once(const std::string& text) {
  json body{{"comment", {{"text", text}}},
            {"languages", {"en"}},
            {"requestedAttributes", {{"TOXICITY", json::object()}}}};
  std::string path = "/v1alpha1/comments:analyze";
  if (!ep_.api_key.empty()) path += "?key=" + ep_.api_key;
  const json res = post_json(ep_, path, body, {});
  try {
    return res.at("attributeScores").at("TOXICITY").at("summaryScore").at("value").get<double>();
  } catch (const json::exception& e) {
    throw TransportError(std::string("toxicity response lacks a summary score: ") + e.what());
  }
}

}  // namespace wozlab
