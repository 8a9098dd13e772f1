#include <doctest.h>

#include <fstream>
#include <map>
#include <sstream>

#include "cli.hpp"
#include "test_support.hpp"
#include "wozlab/metrics.hpp"
#include "wozlab/transcript.hpp"

using namespace wozlab;
using nlohmann::json;

namespace {

struct Invocation {
  int code = 0;
  json manifest;
  std::string out, err;
};

Invocation run(std::vector<std::string> args, std::map<std::string, std::string> env = {}) {
  std::ostringstream out, err;
  cli::DispatchContext ctx;
  ctx.out = &out;
  ctx.err = &err;
  ctx.env = [env](const std::string& k) -> std::optional<std::string> {
    auto it = env.find(k);
    if (it == env.end()) return std::nullopt;
    return it->second;
  };
  const auto r = cli::dispatch(args, ctx);
  return {r.exit_code, r.manifest, out.str(), err.str()};
}

json read_json(const std::filesystem::path& p) {
  std::ifstream in(p);
  return json::parse(in);
}

}  // namespace

TEST_SUITE("cli") {
  TEST_CASE("simulate, evaluate, report") {
    testing::TempDir dir;
    const auto batch = (dir / "batch").string();
    const auto sim = run({"simulate", "--n", "27", "--stratified", "--seed", "7", "--out", batch});
    REQUIRE(sim.code == 0);
    const auto ts = read_transcripts(dir / "batch/transcripts.jsonl");
    REQUIRE(ts.size() == 27);
    for (const auto& t : ts) {
      CHECK(t.complete());
      CHECK(t.messages.size() == 25);
    }
    const json m = read_json(dir / "batch/manifest.json");
    CHECK(m["command"] == "simulate");
    CHECK(m["status"] == "ok");
    CHECK(m["seeds"]["batch"] == 7);
    CHECK(m["seeds"]["runs"].size() == 27);
    CHECK(m["config"]["seed"]["value"] == 7);
    CHECK(m["config"]["seed"]["source"] == "flag");
    const json summary = read_json(dir / "batch/summary.json");
    CHECK(summary["completed"] == 27);

    REQUIRE(run({"evaluate", "--in", batch, "--out", batch}).code == 0);
    CHECK(read_metrics(dir / "batch/metrics.jsonl").size() == 27 * 25);
    const json m2 = read_json(dir / "batch/manifest.json");
    CHECK(m2["command"] == "evaluate");
    CHECK(m2["previous"][0]["command"] == "simulate");

    const auto rep = run({"report", "--batch", batch, "--out", (dir / "report").string(), "--iterations", "20"});
    REQUIRE(rep.code == 0);
    CHECK(std::filesystem::exists(dir / "report/report.json"));
    CHECK(std::filesystem::exists(dir / "report/manifest.json"));

    CHECK(run({"stats", "--batch", batch, "--metric", "lcs_sim_prev_own"}).code == 0);
    CHECK(run({"stats", "--batch", batch, "--metric", "sem_sim_prev_own", "--by", "factor"}).code == 0);
    CHECK(run({"topics", "--batch", batch, "--dimension", "gender", "--iterations", "20", "--out",
               (dir / "topics").string()})
              .code == 0);
    CHECK(std::filesystem::exists(dir / "topics/topics.json"));
  }

  TEST_CASE("output does not depend on parallelism") {
    testing::TempDir dir;
    REQUIRE(run({"simulate", "--n", "6", "--seed", "3", "--out", (dir / "a").string()}).code == 0);
    REQUIRE(run({"simulate", "--n", "6", "--seed", "3", "--parallelism", "3", "--out", (dir / "b").string()}).code == 0);
    CHECK(testing::read_file(dir / "a/transcripts.jsonl") == testing::read_file(dir / "b/transcripts.jsonl"));
  }

  TEST_CASE("usage errors exit 2") {
    testing::TempDir dir;
    CHECK(run({"simulate", "--bogus"}).code == 2);
    CHECK(run({"frobnicate"}).code == 2);
    CHECK(run({}).code == 2);
    CHECK(run({"evaluate", "--in", (dir / "nothing").string(), "--out", (dir / "o").string()}).code == 2);
    std::filesystem::create_directories(dir / "empty");
    CHECK(run({"evaluate", "--in", (dir / "empty").string(), "--out", (dir / "o").string()}).code == 2);
    CHECK(run({"simulate", "--out", (dir / "o").string()}).code == 2);  // --n missing
    CHECK(run({"--help"}).code == 0);
    CHECK(run({"--version"}).out.find(cli::kToolVersion) != std::string::npos);
  }

  TEST_CASE("pipeline failures exit 1 with an error record") {
    testing::TempDir dir;
    std::filesystem::create_directories(dir / "bad");
    std::ofstream(dir / "bad/transcripts.jsonl") << "{\"record\":\"header\"}\n";
    const auto r = run({"evaluate", "--in", (dir / "bad").string(), "--out", (dir / "o").string()});
    CHECK(r.code == 1);
    const json e = json::parse(r.err.substr(r.err.find('{')));
    CHECK(e["error"]["command"] == "evaluate");
    CHECK(e["error"]["kind"] == "integrity");

    // Every run fails against an unreachable service, so the report has nothing to analyse.
    const auto down = (dir / "down").string();
    REQUIRE(run({"simulate", "--n", "2", "--provider", "http", "--base-url", "http://127.0.0.1:1", "--model", "m",
                 "--max-attempts", "1", "--timeout-ms", "200", "--out", down})
                .code == 0);
    CHECK(read_json(dir / "down/summary.json")["failed"] == 2);
    REQUIRE(run({"evaluate", "--in", down, "--out", down}).code == 0);
    const auto rep = run({"report", "--batch", down, "--out", (dir / "rep").string()});
    CHECK(rep.code == 1);
    CHECK(rep.err.find("\"analysis\"") != std::string::npos);
    const json m = read_json(dir / "rep/manifest.json");
    CHECK(m["status"] == "failed");
    CHECK(m["error"]["kind"] == "analysis");
  }

  TEST_CASE("flags beat environment beats config file") {
    testing::TempDir dir;
    std::ofstream(dir / "cfg.json") << R"({"simulate": {"seed": 11, "n": 2, "turn_limit": 2}, "batch_id": "filebatch"})";
    const auto cfg = (dir / "cfg.json").string();
    auto r = run({"--config", cfg, "simulate", "--out", (dir / "a").string()}, {{"WOZLAB_SEED", "22"}});
    REQUIRE(r.code == 0);
    json c = read_json(dir / "a/manifest.json")["config"];
    CHECK(c["seed"]["value"] == 22);
    CHECK(c["seed"]["source"] == "env");
    CHECK(c["n"]["source"] == "file");
    CHECK(c["batch_id"]["value"] == "filebatch");
    CHECK(c["parallelism"]["source"] == "default");
    r = run({"--config", cfg, "simulate", "--seed", "33", "--out", (dir / "b").string()}, {{"WOZLAB_SEED", "22"}});
    REQUIRE(r.code == 0);
    c = read_json(dir / "b/manifest.json")["config"];
    CHECK(c["seed"]["value"] == 33);
    CHECK(c["seed"]["source"] == "flag");
    const auto ts = read_transcripts(dir / "b/transcripts.jsonl");
    REQUIRE(ts.size() == 2);
    CHECK(ts[0].messages.size() == 5);
    // The config path can also come from the environment.
    CHECK(run({"simulate", "--out", (dir / "c").string()}, {{"WOZLAB_CONFIG", cfg}}).code == 0);
  }

  TEST_CASE("compare refuses batches scored differently") {
    testing::TempDir dir;
    const auto a = (dir / "a").string(), b = (dir / "b").string();
    REQUIRE(run({"simulate", "--n", "4", "--seed", "1", "--out", a}).code == 0);
    REQUIRE(run({"simulate", "--n", "4", "--seed", "2", "--out", b}).code == 0);
    REQUIRE(run({"evaluate", "--in", a, "--out", a}).code == 0);
    REQUIRE(run({"evaluate", "--in", b, "--out", b, "--readability-profile", "default"}).code == 0);
    const auto r = run({"compare", "--a", a, "--b", b, "--out", (dir / "cmp").string(), "--iterations", "10"});
    CHECK(r.code == 1);
    CHECK(r.err.find("readability") != std::string::npos);
    REQUIRE(run({"evaluate", "--in", b, "--out", b}).code == 0);
    CHECK(run({"compare", "--a", a, "--b", b, "--out", (dir / "cmp").string(), "--iterations", "10"}).code == 0);
    CHECK(std::filesystem::exists(dir / "cmp/comparison.json"));
  }

  TEST_CASE("review export") {
    testing::TempDir dir;
    const auto a = (dir / "a").string();
    REQUIRE(run({"simulate", "--n", "3", "--out", a}).code == 0);
    REQUIRE(run({"review", "--batch", a, "--out", (dir / "r").string()}).code == 0);
    CHECK(std::filesystem::exists(dir / "r/index.csv"));
  }
}
