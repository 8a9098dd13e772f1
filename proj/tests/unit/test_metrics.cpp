#include <doctest.h>

#include <cmath>

#include "test_support.hpp"
#include "wozlab/error.hpp"
#include "wozlab/metrics.hpp"
#include "wozlab/mock_providers.hpp"
#include "wozlab/sentiment.hpp"
#include "wozlab/similarity.hpp"

using namespace wozlab;

namespace {

GatewayOptions quiet() {
  GatewayOptions o;
  o.sleeper = [](std::chrono::milliseconds) {};
  return o;
}

// Alternates between a vector and its negation.
class FlippingEmbeddings final : public EmbeddingBackend {
 public:
  std::vector<Embedding> embed_once(std::span<const std::string> texts) override {
    std::vector<Embedding> out;
    for (std::size_t i = 0; i < texts.size(); ++i)
      out.push_back(i % 2 == 0 ? Embedding{1.0f, 0.5f} : Embedding{-1.0f, -0.5f});
    return out;
  }
  std::size_t dimension() const override { return 2; }
  std::string provider_id() const override { return "flip"; }
  std::string model_id() const override { return "flip"; }
};

class BrokenEmbeddings final : public EmbeddingBackend {
 public:
  std::vector<Embedding> embed_once(std::span<const std::string>) override {
    throw TransportError("offline");
  }
  std::size_t dimension() const override { return 4; }
  std::string provider_id() const override { return "broken"; }
  std::string model_id() const override { return "broken"; }
};

class RaggedEmbeddings final : public EmbeddingBackend {
 public:
  std::vector<Embedding> embed_once(std::span<const std::string> texts) override {
    std::vector<Embedding> out;
    for (std::size_t i = 0; i < texts.size(); ++i) out.push_back(Embedding(2 + i, 1.0f));
    return out;
  }
  std::size_t dimension() const override { return 0; }
  std::string provider_id() const override { return "ragged"; }
  std::string model_id() const override { return "ragged"; }
};

}  // namespace

TEST_SUITE("metrics") {
  TEST_CASE("every field of a scored transcript") {
    EmbeddingGateway eg(std::make_shared<HashingEmbeddingBackend>(), quiet());
    ToxicityGateway tg(std::make_shared<TableToxicityBackend>(), quiet());
    const Evaluator ev(&eg, &tg);
    const auto t = testing::alternating_transcript(
        "t", {"Hello there, nice to meet you.", "Hi! I love electric cars.", "Great, why do you love them?",
              "They are quiet and cheap to run."});
    const auto rs = ev.evaluate_transcript(t);
    REQUIRE(rs.size() == 4);
    CHECK_FALSE(rs[0].lcs_sim_prev_other);
    CHECK_FALSE(rs[0].sem_sim_prev_own);
    CHECK(rs[0].missing.empty());  // undefined, not failed
    CHECK(rs[1].lcs_sim_prev_other);
    CHECK_FALSE(rs[1].lcs_sim_prev_own);
    for (std::size_t i = 0; i < 4; ++i) {
      const auto& r = rs[i];
      CHECK(r.message_index == i);
      CHECK(r.transcript_id == "t");
      CHECK(r.toxicity);
      CHECK(r.sentiment_compound == doctest::Approx(sentiment_compound(t.messages[i].text)));
      CHECK(*r.readability_norm >= 0.0);
      CHECK(*r.readability_norm <= 1.0);
      if (i >= 2) {
        CHECK(*r.lcs_sim_prev_own == lcsseq_similarity(t.messages[i].text, t.messages[i - 2].text));
        CHECK(*r.sem_sim_prev_own >= 0.0);
        CHECK(*r.sem_sim_prev_own <= 1.0);
      }
    }
    CHECK(ev.evaluate_message(t, 2) == rs[2]);
    CHECK_THROWS_AS(ev.evaluate_message(t, 9), ValidationError);
  }

  TEST_CASE("toxicity flag uses a closed threshold") {
    ToxicityGateway tg(std::make_shared<TableToxicityBackend>(std::map<std::string, double>{
                           {"just under", 0.4999}, {"exactly", 0.5}, {"well over", 0.7}}),
                       quiet());
    const Evaluator ev(nullptr, &tg);
    const auto rs = ev.evaluate_transcript(testing::alternating_transcript("t", {"just under", "exactly", "well over"}));
    CHECK_FALSE(*rs[0].is_toxic);
    CHECK(*rs[1].is_toxic);
    CHECK(*rs[2].is_toxic);
    CHECK(*rs[2].toxicity == 0.7);
    CHECK(rs[0].value("is_toxic") == 0.0);
    CHECK(rs[2].value("is_toxic") == 1.0);

    MetricConfig strict;
    strict.toxicity_threshold = 0.8;
    CHECK_FALSE(*Evaluator(nullptr, &tg, strict).evaluate_transcript(testing::alternating_transcript("t", {"well over"}))[0].is_toxic);
    MetricConfig bad;
    bad.toxicity_threshold = 1.5;
    CHECK_THROWS_AS(Evaluator(nullptr, &tg, bad), ConfigError);
  }

  TEST_CASE("published low-toxicity examples stay below the flag") {
    std::map<std::string, double> table;
    std::vector<std::string> texts;
    for (const auto& r : testing::reference_messages().at("toxicity")) {
      table[r.at("text")] = r.at("score");
      texts.push_back(r.at("text"));
    }
    ToxicityGateway tg(std::make_shared<TableToxicityBackend>(table), quiet());
    const auto rs = Evaluator(nullptr, &tg).evaluate_transcript(testing::alternating_transcript("t", texts));
    REQUIRE(rs.size() == 5);
    for (const auto& r : rs) CHECK_FALSE(*r.is_toxic);
  }

  TEST_CASE("missing providers are recorded, not zeroed") {
    const Evaluator ev(nullptr, nullptr);
    const auto rs = ev.evaluate_transcript(testing::alternating_transcript("t", {"a b c.", "d e f.", "g h i."}));
    CHECK_FALSE(rs[0].toxicity);
    CHECK(rs[0].missing.count("toxicity") == 1);
    CHECK_FALSE(rs[2].sem_sim_prev_own);
    CHECK(rs[2].missing.count("sem_sim_prev_own") == 1);
    CHECK(rs[2].lcs_sim_prev_own);
    CHECK_FALSE(rs[0].value("toxicity"));
    const auto p = ev.provenance();
    CHECK(p.embedding_provider == "none");
    CHECK(p.toxicity_provider == "none");

    EmbeddingGateway broken(std::make_shared<BrokenEmbeddings>(), quiet(), 1);
    const auto br = Evaluator(&broken, nullptr).evaluate_transcript(testing::alternating_transcript("t", {"a", "b"}));
    CHECK(br[1].missing.at("sem_sim_prev_other").find("embedding failed") != std::string::npos);

    const auto empty = ev.evaluate_transcript(testing::alternating_transcript("t", {"...", "ok then fine."}));
    CHECK_FALSE(empty[0].readability_raw);
    CHECK(empty[0].missing.count("readability") == 1);
  }

  TEST_CASE("negative cosines are stored as zero") {
    EmbeddingGateway eg(std::make_shared<FlippingEmbeddings>(), quiet());
    const auto t = testing::alternating_transcript("t", {"x", "y", "z"});
    const auto s = message_similarities(t, &eg);
    CHECK(*s[1].sem_prev_other == 0.0);
    CHECK(*s[2].sem_prev_own == doctest::Approx(1.0));
  }

  TEST_CASE("mixed embedding dimensions are an integrity failure") {
    EmbeddingGateway eg(std::make_shared<RaggedEmbeddings>(), quiet());
    const std::vector<std::string> texts{"a", "b"};
    CHECK_THROWS_AS(eg.embed_batch(texts), IntegrityError);
  }

  TEST_CASE("records round-trip through files") {
    EmbeddingGateway eg(std::make_shared<HashingEmbeddingBackend>(), quiet());
    const auto rs = Evaluator(&eg, nullptr).evaluate_transcript(
        testing::alternating_transcript("t", {"Hello there.", "Hi, how are you?", "Fine thanks."}));
    testing::TempDir dir;
    write_metrics(dir / "m.jsonl", rs);
    CHECK(read_metrics(dir / "m.jsonl") == rs);
    const MetricRecord back = nlohmann::json(rs[0]).get<MetricRecord>();
    CHECK(back == rs[0]);
  }

  TEST_CASE("metric names") {
    for (const auto& n : metric_names()) CHECK(is_metric_name(n));
    CHECK_FALSE(is_metric_name("charisma"));
    MetricRecord r;
    CHECK_THROWS_AS(r.value("charisma"), ValidationError);
  }

  TEST_CASE("provenance diff lists differing fields") {
    EmbeddingGateway eg(std::make_shared<HashingEmbeddingBackend>(), quiet());
    const auto a = Evaluator(&eg, nullptr).provenance();
    MetricConfig cfg;
    cfg.readability = ReadabilityConfig::recalibrated();
    const auto b = Evaluator(nullptr, nullptr, cfg).provenance();
    CHECK(a.diff(a).empty());
    const auto d = a.diff(b);
    CHECK(d.size() == 3);  // readability, embedding provider and model
    CHECK(MetricProvenance::from_json(a.to_json()) == a);
  }
}
