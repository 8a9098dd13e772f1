#include <benchmark/benchmark.h>

#include <random>
#include <string>
#include <vector>

#include "wozlab/engine.hpp"
#include "wozlab/metrics.hpp"
#include "wozlab/mock_providers.hpp"
#include "wozlab/readability.hpp"
#include "wozlab/sentiment.hpp"
#include "wozlab/similarity.hpp"
#include "wozlab/stats.hpp"
#include "wozlab/topics.hpp"

using namespace wozlab;

namespace {

std::string sentence(std::mt19937_64& rng, int words) {
  static const char* pool[] = {"solar", "panels",  "are",    "great", "but",    "costly", "I",
                               "think", "battery", "range",  "seems", "fine",   "really", "not",
                               "bad",   "maybe",   "winter", "heat",  "pump",   "saves"};
  std::uniform_int_distribution<std::size_t> pick(0, std::size(pool) - 1);
  std::string s;
  for (int i = 0; i < words; ++i) s += (i ? " " : "") + std::string(pool[pick(rng)]);
  return s + ".";
}

GatewayOptions quiet() {
  GatewayOptions o;
  o.sleeper = [](std::chrono::milliseconds) {};
  return o;
}

}  // namespace

static void BM_Lcsseq(benchmark::State& state) {
  std::mt19937_64 rng(1);
  const auto a = sentence(rng, static_cast<int>(state.range(0))), b = sentence(rng, static_cast<int>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(lcsseq_similarity(a, b));
  state.SetBytesProcessed(static_cast<int64_t>(state.iterations() * (a.size() + b.size())));
}
BENCHMARK(BM_Lcsseq)->Arg(10)->Arg(60)->Arg(200);

static void BM_SentimentCompound(benchmark::State& state) {
  std::mt19937_64 rng(2);
  const auto text = sentence(rng, 50);
  const auto& analyzer = SentimentAnalyzer::shared();
  for (auto _ : state) benchmark::DoNotOptimize(analyzer.compound(text));
}
BENCHMARK(BM_SentimentCompound);

static void BM_ReadingEase(benchmark::State& state) {
  std::mt19937_64 rng(3);
  const auto text = sentence(rng, 50);
  const auto rule = static_cast<SyllableRule>(state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(flesch_reading_ease(text, rule));
}
BENCHMARK(BM_ReadingEase)->Arg(static_cast<int>(SyllableRule::VowelGroups))->Arg(static_cast<int>(SyllableRule::Hyphenation));

static void BM_GibbsSweep(benchmark::State& state) {
  std::mt19937_64 rng(4);
  std::vector<std::string> docs;
  for (int d = 0; d < state.range(0); ++d) docs.push_back(sentence(rng, 30));
  const Corpus c = preprocess(docs);
  GibbsSampler s(c, 5, 10.0, 0.01, 1);
  for (auto _ : state) s.sweep();
  state.SetItemsProcessed(static_cast<int64_t>(state.iterations() * c.token_count()));
}
BENCHMARK(BM_GibbsSweep)->Arg(200)->Arg(2000);

static void BM_WelchTest(benchmark::State& state) {
  std::mt19937_64 rng(5);
  std::normal_distribution<double> z;
  std::vector<double> x(static_cast<std::size_t>(state.range(0))), y(x.size());
  for (auto& v : x) v = z(rng);
  for (auto& v : y) v = z(rng) + 0.2;
  for (auto _ : state) benchmark::DoNotOptimize(welch_t_test(x, y));
}
BENCHMARK(BM_WelchTest)->Arg(25)->Arg(1000);

static void BM_SimulateAndEvaluate(benchmark::State& state) {
  ChatGateway gw(std::make_shared<MockConversationBackend>(), quiet());
  EmbeddingGateway eg(std::make_shared<HashingEmbeddingBackend>(), quiet());
  ToxicityGateway tg(std::make_shared<TableToxicityBackend>(), quiet());
  const Evaluator ev(&eg, &tg);
  BatchOptions o;
  o.n = 1;
  std::uint64_t seed = 0;
  for (auto _ : state) {
    o.seed = ++seed;
    const auto batch = run_batch(o, DimensionSet::default_us(), gw);
    benchmark::DoNotOptimize(ev.evaluate_transcript(batch.transcripts.at(0)));
  }
}
BENCHMARK(BM_SimulateAndEvaluate);

BENCHMARK_MAIN();
