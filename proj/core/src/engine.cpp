#include "wozlab/engine.hpp"

#include <atomic>
#include <cctype>
#include <cstdio>
#include <ctime>
#include <exception>
#include <mutex>
#include <thread>

#include "wozlab/error.hpp"
#include "wozlab/random.hpp"

namespace wozlab {
namespace {

std::string format_utc(std::chrono::system_clock::time_point tp) {
  using namespace std::chrono;
  const auto ms = duration_cast<milliseconds>(tp.time_since_epoch()).count();
  const std::time_t secs = static_cast<std::time_t>(ms / 1000);
  std::tm tm{};
  gmtime_r(&secs, &tm);
  char buf[96];
  std::snprintf(buf, sizeof buf, "%04d-%02d-%02dT%02d:%02d:%02d.%03dZ", tm.tm_year + 1900,
                tm.tm_mon + 1, tm.tm_mday, tm.tm_hour, tm.tm_min, tm.tm_sec,
                static_cast<int>(ms % 1000));
  return buf;
}

std::string timestamp(TimestampMode mode, std::size_t message_index) {
  if (mode == TimestampMode::Wall) return format_utc(std::chrono::system_clock::now());
  // 2024-01-01T00:00:00Z
  const std::chrono::system_clock::time_point epoch{std::chrono::seconds(1704067200)};
  return format_utc(epoch + std::chrono::seconds(message_index));
}

}  // namespace

ExperimentConfig randomize_config(std::uint64_t seed, const DimensionSet& dims,
                                  const AgentNames& names) {
  Rng rng(seed);
  ExperimentConfig c;
  c.seed = seed;
  c.bot_identity_disclosure = rng.coin();
  c.wizard_demo_disclosure = rng.coin();
  c.simulacrum_demo_disclosure = rng.coin();
  c.instruction_granularity = static_cast<int>(rng.below(3)) + 1;
  const auto& topics = builtin_topic_goals();
  const auto topic = rng.below(topics.size());
  if (c.instruction_granularity >= 2) c.topic_goal = topics[topic];
  c.wizard_temperature = kWizardTemperatures[rng.below(kWizardTemperatures.size())];
  c.simulacrum_temperature = kDefaultTemperature;
  c.wizard_persona = sample_persona(dims, rng, names.wizard);
  c.simulacrum_persona = sample_persona(dims, rng, names.simulacrum);
  return c.coupled();
}

ExperimentConfig randomize_config_for_cell(std::uint64_t seed, const DimensionSet& dims,
                                           int cell, const AgentNames& names) {
  ExperimentConfig c = randomize_config(seed, dims, names);
  apply_combination(c, cell);
  if (c.instruction_granularity == 1) {
    c.topic_goal.reset();
  } else if (!c.topic_goal) {
    // The seeded draw had no topic; pick one from an independent stream.
    const auto& topics = builtin_topic_goals();
    c.topic_goal = topics[derive_seed(seed, 0x70c1c) % topics.size()];
  }
  return c;
}

std::string transcript_id_for(std::uint64_t seed) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "conv-%016llx", static_cast<unsigned long long>(seed));
  return buf;
}

int count_words(std::string_view text) {
  int n = 0;
  bool in_word = false;
  for (char ch : text) {
    const bool space = std::isspace(static_cast<unsigned char>(ch)) != 0;
    if (!space && !in_word) ++n;
    in_word = !space;
  }
  return n;
}

std::vector<ChatTurn> history_for(Speaker agent, const std::vector<Message>& messages) {
  std::vector<ChatTurn> h;
  h.reserve(messages.size());
  const bool wizard = is_wizard(agent);
  for (const auto& m : messages)
    h.push_back({is_wizard(m.speaker) == wizard ? ChatRole::Assistant : ChatRole::User, m.text});
  return h;
}

ConversationTranscript run_closed_loop(const ExperimentConfig& cfg_in, ChatGateway& gateway,
                                       const EngineOptions& opts) {
  cfg_in.validate();
  const ExperimentConfig cfg = cfg_in.coupled();
  const PromptText wizard_prompt = assemble_wizard_prompt(cfg, cfg.wizard_persona);
  const PromptText simulacrum_prompt = assemble_simulacrum_prompt(cfg, cfg.simulacrum_persona);

  ConversationTranscript t;
  t.transcript_id = opts.transcript_id.empty() ? transcript_id_for(cfg.seed) : opts.transcript_id;
  t.config = cfg;
  t.stage = cfg.stage;

  auto fail = [&](const std::string& reason) {
    t.status = TranscriptStatus::Failed;
    t.failure_reason = reason;
  };

  auto step = [&](Speaker who, int turn) -> bool {
    ChatRequest req;
    req.system_prompt = is_wizard(who) ? wizard_prompt.text : simulacrum_prompt.text;
    req.history = history_for(who, t.messages);
    req.temperature = is_wizard(who) ? cfg.wizard_temperature : cfg.simulacrum_temperature;
    req.max_retries = opts.max_attempts;
    req.timeout = opts.request_timeout;
    const std::size_t index = t.messages.size();
    ChatResult r;
    try {
      r = gateway.chat_complete(req);
    } catch (const Error& e) {
      fail("provider failure at message " + std::to_string(index + 1) + " (" + to_string(who) +
           "): " + e.what());
      return false;
    }
    if (r.refused) {
      fail("refusal at message " + std::to_string(index + 1) + " (" + to_string(who) +
           "): " + (r.refusal_reason.empty() ? "declined" : r.refusal_reason));
      return false;
    }
    const int words = count_words(r.text);
    if (words >= opts.word_limit)
      t.notes.push_back("message " + std::to_string(index + 1) + " (" + to_string(who) +
                        ") has " + std::to_string(words) + " words; prompted limit is fewer than " +
                        std::to_string(opts.word_limit));
    t.messages.push_back({who, turn, std::move(r.text), timestamp(opts.timestamps, index)});
    return true;
  };

  if (step(Speaker::Wizard, 0)) {
    for (int turn = 1; turn <= cfg.turn_limit; ++turn) {
      if (!step(Speaker::Simulacrum, turn) || !step(Speaker::Wizard, turn)) break;
    }
  }
  if (opts.persist) opts.persist(t);
  return t;
}

std::size_t CoverageReport::cells_covered() const {
  std::size_t n = 0;
  for (auto c : counts) n += c > 0 ? 1 : 0;
  return n;
}

std::vector<int> CoverageReport::missing() const {
  std::vector<int> out;
  for (int i = 0; i < kFactorCombinations; ++i)
    if (counts[static_cast<std::size_t>(i)] == 0) out.push_back(i);
  return out;
}

nlohmann::json CoverageReport::to_json() const {
  nlohmann::json cells = nlohmann::json::array();
  for (int i = 0; i < kFactorCombinations; ++i)
    cells.push_back({{"combination", i},
                     {"label", combination_label(i)},
                     {"count", counts[static_cast<std::size_t>(i)]},
                     {"completed", completed[static_cast<std::size_t>(i)]}});
  return {{"cells_total", kFactorCombinations},
          {"cells_covered", cells_covered()},
          {"missing", missing()},
          {"cells", cells}};
}

nlohmann::json BatchResult::summary() const {
  nlohmann::json runs_j = nlohmann::json::array();
  for (const auto& r : runs)
    runs_j.push_back({{"index", r.index},
                      {"transcript_id", r.transcript_id},
                      {"seed", r.seed},
                      {"combination", r.combination},
                      {"status", r.status == TranscriptStatus::Complete ? "complete" : "failed"},
                      {"reason", r.reason}});
  return {{"batch_id", batch_id},
          {"total", runs.size()},
          {"completed", completed},
          {"failed", failed},
          {"coverage", coverage.to_json()},
          {"runs", runs_j}};
}

ExperimentConfig batch_config(const BatchOptions& opts, const DimensionSet& dims,
                              std::size_t index) {
  const std::uint64_t run_seed = derive_seed(opts.seed, index);
  ExperimentConfig c =
      opts.stratified
          ? randomize_config_for_cell(run_seed, dims, static_cast<int>(index % kFactorCombinations),
                                      opts.names)
          : randomize_config(run_seed, dims, opts.names);
  c.turn_limit = opts.turn_limit;
  return c;
}

BatchResult run_batch(const BatchOptions& opts, const DimensionSet& dims, ChatGateway& gateway,
                      TranscriptStore* store) {
  if (opts.n == 0) throw ValidationError("batch size must be at least 1");
  if (opts.turn_limit < 1) throw ValidationError("turn limit must be at least 1");

  BatchResult result;
  result.batch_id = opts.batch_id;
  result.transcripts.resize(opts.n);
  result.runs.resize(opts.n);

  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= opts.n) return;
      RunStatus& st = result.runs[i];
      st.index = i;
      st.seed = derive_seed(opts.seed, i);
      char id[64];
      std::snprintf(id, sizeof id, "%s-%04zu", opts.batch_id.c_str(), i);
      st.transcript_id = id;
      ConversationTranscript t;
      try {
        ExperimentConfig cfg = batch_config(opts, dims, i);
        st.combination = cfg.combination_index();
        EngineOptions eo = opts.engine;
        eo.transcript_id = st.transcript_id;
        eo.persist = nullptr;
        t = run_closed_loop(cfg, gateway, eo);
      } catch (const std::exception& e) {
        t.transcript_id = st.transcript_id;
        t.status = TranscriptStatus::Failed;
        t.failure_reason = std::string("run aborted: ") + e.what();
      }
      st.status = t.status;
      st.reason = t.failure_reason;
      if (store) store->commit(i, t);
      result.transcripts[i] = std::move(t);
    }
  };

  const std::size_t threads = std::max<std::size_t>(1, std::min(opts.parallelism, opts.n));
  if (threads == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t k = 0; k < threads; ++k) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }

  for (const auto& r : result.runs) {
    const bool ok = r.status == TranscriptStatus::Complete;
    ok ? ++result.completed : ++result.failed;
    if (r.combination < 0) continue;
    const auto cell = static_cast<std::size_t>(r.combination);
    ++result.coverage.counts[cell];
    if (ok) ++result.coverage.completed[cell];
  }
  return result;
}

}  // namespace wozlab
