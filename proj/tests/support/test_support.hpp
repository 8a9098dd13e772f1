#pragma once

#include <filesystem>
#include <fstream>
#include <random>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "wozlab/experiment.hpp"
#include "wozlab/metrics.hpp"
#include "wozlab/transcript.hpp"

namespace testing {

inline std::filesystem::path fixture_path(const std::string& name) {
  return std::filesystem::path(WOZLAB_TEST_FIXTURES) / name;
}

inline const nlohmann::json& reference_messages() {
  static const nlohmann::json j = [] {
    std::ifstream in(fixture_path("reference_messages.json"));
    return nlohmann::json::parse(in);
  }();
  return j;
}

inline std::string read_file(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag = "wozlab") {
    std::random_device rd;
    path_ = std::filesystem::temp_directory_path() /
            (tag + "-" + std::to_string(rd()) + std::to_string(rd()));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& s) const { return path_ / s; }

 private:
  std::filesystem::path path_;
};

/// Opening wizard message then alternation; texts[i] is message i.
inline wozlab::ConversationTranscript alternating_transcript(const std::string& id,
                                                             const std::vector<std::string>& texts,
                                                             const wozlab::ExperimentConfig& cfg = {}) {
  wozlab::ConversationTranscript t;
  t.transcript_id = id;
  t.config = cfg;
  t.stage = cfg.stage;
  for (std::size_t i = 0; i < texts.size(); ++i) {
    wozlab::Message m;
    m.speaker = i % 2 == 0 ? wozlab::Speaker::Wizard : wozlab::Speaker::Simulacrum;
    m.turn_index = static_cast<int>((i + 1) / 2);
    m.text = texts[i];
    m.timestamp = "2024-01-01T00:00:00Z";
    t.messages.push_back(m);
  }
  return t;
}

}  // namespace testing
