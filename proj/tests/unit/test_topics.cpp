#include <doctest.h>

#include <algorithm>
#include <chrono>
#include <numeric>
#include <random>

#include "test_support.hpp"
#include "wozlab/error.hpp"
#include "wozlab/topics.hpp"

using namespace wozlab;

namespace {

// Documents drawn from one of two disjoint ten-word vocabularies.
Corpus disjoint_corpus(std::uint64_t seed, std::size_t docs, std::size_t length,
                       std::vector<int>* truth = nullptr) {
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<int> word(0, 9);
  std::vector<std::vector<std::string>> tokens;
  for (std::size_t d = 0; d < docs; ++d) {
    const int cls = static_cast<int>(d % 2);
    if (truth) truth->push_back(cls);
    std::vector<std::string> doc;
    for (std::size_t i = 0; i < length; ++i)
      doc.push_back((cls == 0 ? "alpha" : "omega") + std::to_string(word(rng)));
    tokens.push_back(doc);
  }
  return Corpus::from_tokens(tokens);
}

// Share of documents whose dominant topic agrees with their class under
// the better of the two topic labelings.
double document_purity(const TopicModel& m, const std::vector<int>& truth) {
  std::size_t agree = 0;
  for (std::size_t d = 0; d < truth.size(); ++d) {
    const auto& th = m.theta[d];
    const int top = static_cast<int>(std::max_element(th.begin(), th.end()) - th.begin());
    agree += top == truth[d] ? 1 : 0;
  }
  const double p = agree / static_cast<double>(truth.size());
  return std::max(p, 1.0 - p);
}

}  // namespace

TEST_SUITE("topics") {
  TEST_CASE("tokenization") {
    const auto& sw = StopwordSet::english();
    CHECK(sw.contains("the"));
    const auto toks = tokenize("The EV's battery, I think, is GREAT!! a b 2024", sw);
    CHECK(std::find(toks.begin(), toks.end(), "the") == toks.end());
    CHECK(std::find(toks.begin(), toks.end(), "battery") != toks.end());
    CHECK(std::find(toks.begin(), toks.end(), "great") != toks.end());
    for (const auto& t : toks) CHECK(t.size() > 1);
    const Corpus c = preprocess({"", "the and of", "solar panels panels"});
    CHECK(c.documents.size() == 1);
    CHECK(c.token_count() == 3);
  }

  TEST_CASE("seeded fits are bitwise reproducible") {
    const Corpus c = disjoint_corpus(1, 40, 15);
    LdaParams p;
    p.topics = 3;
    p.iterations = 150;
    p.seed = 99;
    const TopicModel a = fit_lda(c, p), b = fit_lda(c, p);
    CHECK(a.phi == b.phi);
    CHECK(a.theta == b.theta);
    p.seed = 100;
    CHECK(fit_lda(c, p).phi != a.phi);
  }

  TEST_CASE("every sweep conserves token counts") {
    const Corpus c = disjoint_corpus(2, 30, 12);
    GibbsSampler s(c, 4, 0.5, 0.01, 5);
    const std::size_t tokens = c.token_count();
    for (int sweep = 0; sweep < 50; ++sweep) {
      s.sweep();
      REQUIRE(s.total_assigned() == tokens);
      const auto& nk = s.topic_totals();
      REQUIRE(std::accumulate(nk.begin(), nk.end(), std::size_t{0}) == tokens);
      for (std::size_t d = 0; d < c.documents.size(); ++d) {
        std::size_t row = 0;
        for (int k = 0; k < 4; ++k) row += s.doc_topic(d, k);
        REQUIRE(row == c.documents[d].size());
      }
      for (int k = 0; k < 4; ++k) {
        std::size_t col = 0;
        for (std::size_t w = 0; w < c.vocabulary.size(); ++w) col += s.topic_term(k, w);
        REQUIRE(col == nk[static_cast<std::size_t>(k)]);
      }
    }
  }

  TEST_CASE("distributions are normalized") {
    const Corpus c = disjoint_corpus(3, 20, 10);
    LdaParams p;
    p.topics = 2;
    p.iterations = 50;
    const TopicModel m = fit_lda(c, p);
    for (const auto& row : m.phi) CHECK(std::accumulate(row.begin(), row.end(), 0.0) == doctest::Approx(1.0));
    for (const auto& row : m.theta) CHECK(std::accumulate(row.begin(), row.end(), 0.0) == doctest::Approx(1.0));
    CHECK(m.alpha == doctest::Approx(25.0));  // 50 / topics
  }

  TEST_CASE("two disjoint vocabularies separate into two topics") {
    int pure = 0;
    for (std::uint64_t run = 0; run < 100; ++run) {
      std::vector<int> truth;
      const Corpus c = disjoint_corpus(1000 + run, 40, 20, &truth);
      LdaParams p;
      p.topics = 2;
      p.alpha = 0.1;
      p.iterations = 200;
      p.seed = run;
      pure += document_purity(fit_lda(c, p), truth) >= 0.9 ? 1 : 0;
    }
    CHECK(pure >= 95);
  }

  TEST_CASE("1000 sweeps over 200 documents finish in under 10 seconds") {
    const Corpus c = disjoint_corpus(4, 200, 20);
    LdaParams p;
    p.iterations = 1000;
    const auto start = std::chrono::steady_clock::now();
    const TopicModel m = fit_lda(c, p);
    const auto elapsed = std::chrono::steady_clock::now() - start;
    CHECK(m.iterations == 1000);
    CHECK(elapsed < std::chrono::seconds(10));
  }

  TEST_CASE("top terms rank by corpus count") {
    const Corpus c = Corpus::from_tokens({{"solar", "solar", "solar", "panel"}, {"panel", "grid"}});
    LdaParams p;
    p.topics = 2;
    p.iterations = 20;
    const auto top = top_terms(c, fit_lda(c, p), 2);
    REQUIRE(top.size() == 2);
    CHECK(top[0].term == "solar");
    CHECK(top[0].count == 3);
    CHECK(top[1].term == "panel");
    CHECK(top_terms(c, fit_lda(c, p), 50).size() == 3);
  }

  TEST_CASE("invalid parameters") {
    const Corpus c = disjoint_corpus(5, 4, 4);
    LdaParams p;
    p.topics = 0;
    CHECK_THROWS_AS(fit_lda(c, p), ValidationError);
    p.topics = 2;
    p.beta = 0.0;
    CHECK_THROWS_AS(fit_lda(c, p), ValidationError);
    p.beta = 0.01;
    p.iterations = -1;
    CHECK_THROWS_AS(fit_lda(c, p), ValidationError);
    p.iterations = 10;
    CHECK_THROWS_AS(fit_lda(Corpus{}, p), ValidationError);
  }

  TEST_CASE("group corpora use disclosed interlocutors only") {
    ExperimentConfig hidden, shown;
    shown.simulacrum_demo_disclosure = true;
    hidden.simulacrum_persona.gender = shown.simulacrum_persona.gender = "Woman";
    auto a = testing::alternating_transcript("a", {"solar panels rock", "yes"}, hidden);
    auto b = testing::alternating_transcript("b", {"electric vehicles rule", "sure"}, shown);
    ExperimentConfig human = hidden;
    human.stage = Stage::Human;
    auto h = testing::alternating_transcript("h", {"charity matters", "ok"}, human);
    const auto& dims = DimensionSet::default_us();
    const Corpus c = group_corpora({a, b, h}, "gender", "Woman", dims);
    CHECK(c.documents.size() == 2);
    CHECK(c.index.count("solar") == 0);
    CHECK(c.index.count("electric") == 1);
    CHECK(c.index.count("charity") == 1);
    const Corpus none = group_corpora({a, b}, "gender", "Man", dims);
    CHECK(none.empty());
    CHECK_FALSE(none.warnings.empty());
    CHECK_THROWS_AS(group_corpora({a}, "gender", "Robot", dims), ValidationError);
    CHECK_THROWS_AS(group_corpora({a}, "height", "tall", dims), ValidationError);
  }
}
