#include "cli.hpp"

#include <atomic>
#include <chrono>
#include <csignal>
#include <cstdlib>
#include <ctime>
#include <fstream>
#include <thread>

#include "wozlab/chat_server.hpp"
#include "wozlab/engine.hpp"
#include "wozlab/http_providers.hpp"
#include "wozlab/metrics.hpp"
#include "wozlab/mock_providers.hpp"
#include "wozlab/report.hpp"
#include "wozlab/session.hpp"
#include "wozlab/stats.hpp"
#include "wozlab/topics.hpp"

namespace wozlab::cli {

namespace {

namespace fs = std::filesystem;
using nlohmann::json;

std::atomic<bool> g_stop{false};
extern "C" void on_signal(int) { g_stop = true; }

std::string utc_now() {
  const std::time_t t = std::time(nullptr);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

void write_text(const fs::path& p, const std::string& s) {
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  if (!out) throw ConfigError("cannot write " + p.string());
  out << s;
  if (!out) throw ConfigError("failed writing " + p.string());
}

struct Run {
  std::ostream& out;
  std::ostream& err;
  const EnvLookup& env;
  Settings& s;
  json manifest;
  std::optional<fs::path> out_dir;
  std::vector<std::string> outputs;

  void set_out_dir(const fs::path& p) {
    out_dir = p;
    fs::create_directories(p);
    manifest["outputs"]["directory"] = p.string();
  }
  void produced(const std::string& name) { outputs.push_back(name); }
  void input(const std::string& role, const fs::path& p) { manifest["inputs"][role] = p.string(); }
};

// One manifest per directory. A command writing into a directory that
// already holds one (evaluate in place) keeps the earlier steps under
// "previous".
void write_manifest(const fs::path& dir, json manifest, bool keep_previous) {
  const fs::path p = dir / "manifest.json";
  json previous = json::array();
  if (keep_previous && fs::exists(p)) {
    std::ifstream in(p);
    json old = json::parse(in, nullptr, false);
    if (old.is_object()) {
      if (old.contains("previous") && old.at("previous").is_array()) previous = old.at("previous");
      old.erase("previous");
      previous.push_back(old);
    }
  }
  if (!previous.empty()) manifest["previous"] = previous;
  write_text(p, manifest.dump(2) + "\n");
}

// ---- inputs --------------------------------------------------------------

fs::path transcripts_path(const fs::path& p) {
  if (!fs::exists(p)) throw UsageError("input " + p.string() + " does not exist");
  if (fs::is_directory(p)) {
    const fs::path f = p / "transcripts.jsonl";
    if (!fs::exists(f)) throw UsageError("no transcripts in " + p.string());
    return f;
  }
  return p;
}

struct Batch {
  std::vector<ConversationTranscript> transcripts;
  std::vector<MetricRecord> records;
  MetricProvenance provenance;
};

Batch load_batch(Run& r, const std::string& role, const fs::path& dir, bool with_metrics) {
  Batch b;
  const fs::path tp = transcripts_path(dir);
  b.transcripts = read_transcripts(tp);
  r.input(role + "_transcripts", tp);
  if (!with_metrics) return b;
  const fs::path base = fs::is_directory(dir) ? dir : dir.parent_path();
  const fs::path mp = base / "metrics.jsonl";
  const fs::path pp = base / "provenance.json";
  if (!fs::exists(mp) || !fs::exists(pp))
    throw UsageError("no metrics in " + base.string() + "; run `evaluate` first");
  b.records = read_metrics(mp);
  std::ifstream in(pp);
  json pj;
  try {
    in >> pj;
  } catch (const json::exception& e) {
    throw IntegrityError(pp.string() + ": " + e.what());
  }
  b.provenance = MetricProvenance::from_json(pj.contains("metrics") ? pj.at("metrics") : pj);
  r.input(role + "_metrics", mp);
  return b;
}

DimensionSet dimensions(Run& r) {
  if (auto p = r.s.maybe_str("demographics")) {
    r.input("demographics", *p);
    return DimensionSet::load(*p);
  }
  return DimensionSet::default_us();
}

// ---- providers -----------------------------------------------------------

std::string secret(Run& r, const std::string& env_key, const std::string& def_var) {
  const std::string var = r.s.str(env_key, def_var);
  if (!r.env) return {};
  return r.env(var).value_or("");
}

GatewayOptions gateway_options(Run& r) {
  GatewayOptions go;
  go.max_in_flight = static_cast<std::size_t>(r.s.integer("max_in_flight", 8));
  go.requests_per_second = r.s.number("requests_per_second", 0.0);
  return go;
}

std::shared_ptr<ChatGateway> chat_gateway(Run& r) {
  const std::string provider = r.s.str("provider", "mock");
  std::shared_ptr<ChatBackend> backend;
  if (provider == "mock") {
    backend = std::make_shared<MockConversationBackend>(r.s.unsigned_integer("mock_salt", 0));
  } else if (provider == "http") {
    Endpoint ep;
    ep.base_url = r.s.required("base_url");
    ep.model = r.s.str("model", "gpt-4");
    ep.api_key = secret(r, "api_key_env", "WOZLAB_API_KEY");
    ep.timeout = std::chrono::milliseconds(r.s.integer("timeout_ms", 60000));
    backend = std::make_shared<OpenAiChatBackend>(ep);
  } else {
    throw UsageError("--provider must be mock or http, got '" + provider + "'");
  }
  auto gw = std::make_shared<ChatGateway>(backend, gateway_options(r));
  r.manifest["providers"]["chat"] = {{"provider", gw->provider_id()}, {"model", gw->model_id()}};
  return gw;
}

std::shared_ptr<EmbeddingGateway> embedding_gateway(Run& r) {
  const std::string provider = r.s.str("embedding_provider", "mock");
  const auto dim = static_cast<std::size_t>(r.s.integer("embedding_dim", 384));
  std::shared_ptr<EmbeddingBackend> backend;
  if (provider == "none") return nullptr;
  if (provider == "mock") {
    backend = std::make_shared<HashingEmbeddingBackend>(dim);
  } else if (provider == "http") {
    Endpoint ep;
    ep.base_url = r.s.required("embedding_url");
    ep.model = r.s.str("embedding_model", "text-embedding-3-small");
    ep.api_key = secret(r, "embedding_api_key_env", "WOZLAB_API_KEY");
    backend = std::make_shared<HttpEmbeddingBackend>(ep, dim);
  } else {
    throw UsageError("--embedding-provider must be mock, http or none");
  }
  auto gw = std::make_shared<EmbeddingGateway>(backend, gateway_options(r));
  r.manifest["providers"]["embedding"] = {{"provider", gw->provider_id()}, {"model", gw->model_id()}};
  return gw;
}

std::shared_ptr<ToxicityGateway> toxicity_gateway(Run& r) {
  const std::string provider = r.s.str("toxicity_provider", "mock");
  std::shared_ptr<ToxicityBackend> backend;
  if (provider == "none") return nullptr;
  if (provider == "mock") {
    std::map<std::string, double> table;
    if (auto p = r.s.maybe_str("toxicity_table")) {
      std::ifstream in(*p);
      if (!in) throw UsageError("cannot open toxicity table " + *p);
      try {
        json j;
        in >> j;
        table = j.get<std::map<std::string, double>>();
      } catch (const json::exception& e) {
        throw UsageError("toxicity table " + *p + ": " + e.what());
      }
      r.input("toxicity_table", *p);
    }
    backend = std::make_shared<TableToxicityBackend>(table, r.s.number("toxicity_baseline", 0.01));
  } else if (provider == "http") {
    Endpoint ep;
    ep.base_url = r.s.str("toxicity_url", "https://commentanalyzer.googleapis.com");
    ep.api_key = secret(r, "toxicity_api_key_env", "WOZLAB_TOXICITY_API_KEY");
    backend = std::make_shared<PerspectiveToxicityBackend>(ep);
  } else {
    throw UsageError("--toxicity-provider must be mock, http or none");
  }
  auto gw = std::make_shared<ToxicityGateway>(backend, gateway_options(r));
  r.manifest["providers"]["toxicity"] = {{"provider", gw->provider_id()}, {"model", gw->model_id()}};
  return gw;
}

LdaParams lda_params(Run& r) {
  LdaParams p;
  p.topics = static_cast<int>(r.s.integer("topics", p.topics));
  p.alpha = r.s.maybe_number("lda_alpha");
  p.beta = r.s.number("lda_beta", p.beta);
  p.iterations = static_cast<int>(r.s.integer("iterations", p.iterations));
  p.seed = r.s.unsigned_integer("lda_seed", p.seed);
  r.manifest["seeds"]["lda"] = p.seed;
  return p;
}

Role role_setting(Run& r, const std::string& def) {
  try {
    return role_from_string(r.s.str("speaker", def));
  } catch (const ValidationError& e) {
    throw UsageError(e.what());
  }
}

AggregationUnit unit_setting(Run& r) {
  try {
    return aggregation_unit_from_string(r.s.str("unit", "conversation"));
  } catch (const ValidationError& e) {
    throw UsageError(e.what());
  }
}

// ---- commands ------------------------------------------------------------

void cmd_simulate(Run& r) {
  const long long n = r.s.integer("n", 0);
  if (n < 1) throw UsageError("simulate: --n must be a positive count");
  BatchOptions o;
  o.n = static_cast<std::size_t>(n);
  o.seed = r.s.unsigned_integer("seed", 0);
  o.stratified = r.s.flag("stratified", false);
  o.parallelism = static_cast<std::size_t>(std::max(1LL, r.s.integer("parallelism", 1)));
  o.turn_limit = static_cast<int>(r.s.integer("turn_limit", kDefaultTurnLimit));
  o.batch_id = r.s.str("batch_id", "batch");
  o.engine.word_limit = static_cast<int>(r.s.integer("word_limit", 80));
  o.engine.max_attempts = static_cast<int>(r.s.integer("max_attempts", 3));
  const std::string ts = r.s.str("timestamps", "logical");
  if (ts != "logical" && ts != "wall") throw UsageError("--timestamps must be logical or wall");
  o.engine.timestamps = ts == "wall" ? TimestampMode::Wall : TimestampMode::Logical;
  const DimensionSet dims = dimensions(r);
  r.set_out_dir(r.s.required("out"));
  auto gw = chat_gateway(r);

  r.manifest["seeds"]["batch"] = o.seed;
  // A fresh batch invalidates metrics evaluated in place earlier.
  for (const char* stale : {"metrics.jsonl", "provenance.json"}) fs::remove(*r.out_dir / stale);
  TranscriptStore store(*r.out_dir / "transcripts.jsonl");
  const BatchResult result = run_batch(o, dims, *gw, &store);
  r.produced("transcripts.jsonl");
  write_text(*r.out_dir / "summary.json", result.summary().dump(2) + "\n");
  r.produced("summary.json");
  json run_seeds = json::array();
  for (const auto& run : result.runs) run_seeds.push_back({{"transcript_id", run.transcript_id}, {"seed", run.seed}});
  r.manifest["seeds"]["runs"] = run_seeds;
  r.out << "simulated " << result.runs.size() << " conversations: " << result.completed
        << " complete, " << result.failed << " failed, " << result.coverage.cells_covered()
        << "/" << kFactorCombinations << " cells covered -> " << r.out_dir->string() << "\n";
}

void cmd_evaluate(Run& r) {
  const fs::path in = r.s.required("in");
  const fs::path tp = transcripts_path(in);
  const auto transcripts = read_transcripts(tp);
  if (transcripts.empty()) throw UsageError("no transcripts in " + in.string());
  r.input("transcripts", tp);

  MetricConfig mc;
  mc.toxicity_threshold = r.s.number("toxicity_threshold", 0.5);
  const std::string profile = r.s.str("readability_profile", "recalibrated");
  if (profile == "recalibrated")
    mc.readability = ReadabilityConfig::recalibrated();
  else if (profile != "default")
    throw UsageError("--readability-profile must be default or recalibrated");
  const auto parallelism = static_cast<std::size_t>(std::max(1LL, r.s.integer("parallelism", 1)));
  r.set_out_dir(r.s.required("out"));
  auto emb = embedding_gateway(r);
  auto tox = toxicity_gateway(r);
  const Evaluator ev(emb.get(), tox.get(), mc);

  std::vector<std::vector<MetricRecord>> per(transcripts.size());
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mu;
  auto worker = [&] {
    for (std::size_t i; (i = next++) < transcripts.size();) {
      try {
        per[i] = ev.evaluate_transcript(transcripts[i]);
      } catch (...) {
        std::lock_guard lock(failure_mu);
        if (!failure) failure = std::current_exception();
      }
    }
  };
  std::vector<std::thread> pool;
  for (std::size_t k = 1; k < std::min(parallelism, transcripts.size()); ++k) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();
  if (failure) std::rethrow_exception(failure);

  std::vector<MetricRecord> records;
  for (auto& v : per) records.insert(records.end(), v.begin(), v.end());
  const fs::path out_t = *r.out_dir / "transcripts.jsonl";
  if (!fs::exists(out_t) || !fs::equivalent(out_t, tp)) write_transcripts(out_t, transcripts);
  r.produced("transcripts.jsonl");
  write_metrics(*r.out_dir / "metrics.jsonl", records);
  r.produced("metrics.jsonl");
  const MetricProvenance prov = ev.provenance();
  write_text(*r.out_dir / "provenance.json",
             json{{"metrics", prov.to_json()}, {"source", tp.string()}}.dump(2) + "\n");
  r.produced("provenance.json");
  r.manifest["metric_provenance"] = prov.to_json();
  std::size_t missing = 0;
  for (const auto& rec : records) missing += rec.missing.empty() ? 0 : 1;
  r.out << "evaluated " << transcripts.size() << " transcripts, " << records.size()
        << " messages (" << missing << " with missing metrics) -> " << r.out_dir->string() << "\n";
}

void cmd_topics(Run& r) {
  const Batch b = load_batch(r, "batch", r.s.required("batch"), false);
  const DimensionSet dims = dimensions(r);
  const std::string dimension = r.s.required("dimension");
  const auto value = r.s.maybe_str("value");
  const std::string speaker_name = r.s.str("speaker", "wizard");
  Speaker speaker;
  try {
    speaker = speaker_from_string(speaker_name);
  } catch (const ValidationError& e) {
    throw UsageError(e.what());
  }
  const auto n = static_cast<std::size_t>(r.s.integer("top_n", 15));
  const LdaParams lda = lda_params(r);
  r.set_out_dir(r.s.required("out"));

  std::vector<std::string> values;
  if (value)
    values.push_back(*value);
  else
    values = dims.at(dimension).options;

  json groups = json::array();
  std::string csv = "dimension,value,rank,term,count,topic_weight\n";
  for (const auto& v : values) {
    const Corpus corpus = group_corpora(b.transcripts, dimension, v, dims, speaker);
    json g = {{"value", v},
              {"documents", corpus.documents.size()},
              {"tokens", corpus.token_count()},
              {"warnings", corpus.warnings}};
    if (!corpus.empty()) {
      const TopicModel model = fit_lda(corpus, lda);
      json terms = json::array();
      const auto top = top_terms(corpus, model, n);
      for (std::size_t i = 0; i < top.size(); ++i) {
        terms.push_back({{"term", top[i].term}, {"count", top[i].count}, {"topic_weight", top[i].topic_weight}});
        csv += dimension + "," + v + "," + std::to_string(i + 1) + "," + top[i].term + "," +
               std::to_string(top[i].count) + "," + std::to_string(top[i].topic_weight) + "\n";
      }
      g["terms"] = terms;
      g["model"] = model.to_json(10);
    }
    r.out << dimension << "=" << v << ": " << corpus.documents.size() << " messages";
    for (const auto& w : corpus.warnings) r.out << " (" << w << ")";
    r.out << "\n";
    groups.push_back(g);
  }
  write_text(*r.out_dir / "topics.json",
             json{{"dimension", dimension}, {"speaker", speaker_name}, {"groups", groups}}.dump(2) + "\n");
  write_text(*r.out_dir / "topics.csv", csv);
  r.produced("topics.json");
  r.produced("topics.csv");
}

void cmd_stats(Run& r) {
  const Batch b = load_batch(r, "batch", r.s.required("batch"), true);
  const std::string metric = r.s.required("metric");
  if (!is_metric_name(metric)) throw UsageError("unknown metric '" + metric + "'");
  const std::string by = r.s.str("by", "segment");
  const Role role = role_setting(r, "wizard");
  const AggregationUnit unit = unit_setting(r);
  const double alpha = r.s.number("alpha", 0.05);

  std::vector<TestSlot> tests;
  json desc = json::array();
  if (by == "segment") {
    const auto s = segmented_series(b.records, metric, role, unit);
    for (int seg = 1; seg <= 3; ++seg)
      if (!s.by_segment[seg - 1].empty()) {
        const Descriptive d = descriptive(s.by_segment[seg - 1]);
        desc.push_back({{"segment", seg}, {"stats", d}});
        r.out << metric << " " << to_string(role) << " segment " << seg << ": M=" << d.mean;
        if (d.sd) r.out << " SD=" << *d.sd;
        r.out << " n=" << d.n << "\n";
      }
    tests = segment_trend_tests(b.records, metric, role, unit);
  } else if (by == "factor") {
    tests = factor_effect_tests(b.transcripts, b.records, metric, role);
  } else if (by == "group") {
    std::vector<std::string> dims_list;
    if (auto d = r.s.maybe_str("dimension"))
      dims_list.push_back(*d);
    else
      for (auto d : kDimensionNames) dims_list.emplace_back(d);
    for (const auto& d : dims_list) tests.push_back(group_effect_test(b.transcripts, b.records, metric, role, d));
  } else {
    throw UsageError("--by must be segment, factor or group");
  }

  json tests_j = json::array();
  for (const auto& t : tests) {
    json tj = {{"family", t.family}, {"label", t.label}, {"metric", t.metric}, {"role", to_string(t.role)}};
    tj["result"] = t.result ? json(*t.result) : json(nullptr);
    if (!t.undefined_reason.empty()) tj["note"] = t.undefined_reason;
    tj["significant"] = t.significant(alpha);
    tests_j.push_back(tj);
    r.out << t.label << ": ";
    if (t.result)
      r.out << to_string(t.result->kind) << " statistic=" << t.result->statistic << " df=" << t.result->df
            << (t.result->kind == TestKind::AnovaF ? "," + std::to_string(t.result->df2) : std::string())
            << " p=" << t.result->p_value << (t.significant(alpha) ? " *" : "");
    else
      r.out << "undefined (" << t.undefined_reason << ")";
    r.out << "\n";
  }
  if (auto out = r.s.maybe_str("out")) {
    r.set_out_dir(*out);
    write_text(*r.out_dir / "stats.json",
               json{{"metric", metric}, {"by", by}, {"role", to_string(role)}, {"unit", to_string(unit)},
                    {"alpha", alpha}, {"descriptives", desc}, {"tests", tests_j}}
                       .dump(2) + "\n");
    r.produced("stats.json");
  }
}

ReportConfig report_config(Run& r) {
  ReportConfig c;
  c.alpha = r.s.number("alpha", c.alpha);
  c.role_switch_similarity = r.s.number("role_switch_threshold", c.role_switch_similarity);
  c.unit = unit_setting(r);
  c.topics = !r.s.flag("no_topics", false);
  c.top_terms = static_cast<std::size_t>(r.s.integer("top_n", static_cast<long long>(c.top_terms)));
  c.lda = lda_params(r);
  return c;
}

void cmd_report(Run& r) {
  const fs::path dir = r.s.required("batch");
  const Batch b = load_batch(r, "batch", dir, true);
  const DimensionSet dims = dimensions(r);
  const ReportConfig cfg = report_config(r);
  const std::string id = r.s.str("batch_id", fs::absolute(dir).lexically_normal().filename().string());
  r.set_out_dir(r.s.required("out"));
  const BatchReport rep = build_batch_report(id, b.transcripts, b.records, b.provenance, cfg, dims);
  write_report_files(*r.out_dir, rep);
  for (const char* f : {"report.json", "report.txt", "descriptives.csv", "tests.csv", "topics.csv", "flags.csv"})
    r.produced(f);
  r.out << "report " << id << ": " << rep.complete << " complete transcripts, " << rep.flags.size()
        << " flag(s)\n";
  for (const auto& f : rep.flags) r.out << "  [" << to_string(f.kind) << "] " << f.summary << "\n";
}

void cmd_compare(Run& r) {
  const fs::path a = r.s.required("a");
  const fs::path b = r.s.required("b");
  const Batch ba = load_batch(r, "a", a, true);
  const Batch bb = load_batch(r, "b", b, true);
  const ReportConfig cfg = report_config(r);
  BatchInputs ia{r.s.str("a_label", "a"), ba.transcripts, ba.records, ba.provenance};
  BatchInputs ib{r.s.str("b_label", "b"), bb.transcripts, bb.records, bb.provenance};
  r.set_out_dir(r.s.required("out"));
  const ComparisonReport rep = compare_batches(ia, ib, cfg);
  write_comparison_files(*r.out_dir, rep);
  for (const char* f : {"comparison.json", "comparison.txt", "tests.csv", "descriptives.csv"}) r.produced(f);
  std::size_t sig = 0;
  for (const auto& t : rep.tests) sig += t.significant(cfg.alpha) ? 1 : 0;
  r.out << "compared " << ia.label << " vs " << ib.label << ": " << sig << " of " << rep.tests.size()
        << " series differ at p<" << cfg.alpha << "\n";
}

ServiceOptions service_options(Run& r, const fs::path& storage) {
  ServiceOptions so;
  so.storage_dir = storage / "sessions";
  so.typing_delay = std::chrono::milliseconds(r.s.integer("typing_delay_ms", 0));
  so.abandonment_timeout = std::chrono::minutes(r.s.integer("abandon_minutes", 30));
  so.default_config.turn_limit = static_cast<int>(r.s.integer("turn_limit", kDefaultTurnLimit));
  so.persona_seed = r.s.unsigned_integer("seed", so.persona_seed);
  if (auto p = r.s.maybe_str("instrument")) {
    so.instrument = SurveyInstrument::load(*p);
    r.input("instrument", *p);
  }
  so.dims = dimensions(r);
  so.alert = [&err = r.err](const std::string& msg) {
    err << json{{"alert", msg}, {"at", utc_now()}}.dump() << std::endl;
  };
  r.manifest["seeds"]["wizard_persona"] = so.persona_seed;
  return so;
}

void cmd_serve(Run& r) {
  const fs::path storage = r.s.str("storage", "wozlab-sessions");
  ServerOptions srv;
  srv.host = r.s.str("host", srv.host);
  srv.port = static_cast<int>(r.s.integer("port", srv.port));
  srv.sweep_interval = std::chrono::seconds(r.s.integer("sweep_seconds", 60));
  const long long run_seconds = r.s.integer("run_seconds", 0);
  r.set_out_dir(storage);
  auto gw = chat_gateway(r);
  SessionService service(gw, service_options(r, storage));
  r.produced("sessions/");
  ChatServer server(service, srv);
  const int port = server.start();
  r.manifest["server"] = {{"host", srv.host}, {"port", port}};
  r.out << "listening on http://" << srv.host << ":" << port << std::endl;

  g_stop = false;
  auto prev_int = std::signal(SIGINT, on_signal);
  auto prev_term = std::signal(SIGTERM, on_signal);
  const auto started = std::chrono::steady_clock::now();
  while (!g_stop) {
    std::this_thread::sleep_for(std::chrono::milliseconds(100));
    if (run_seconds > 0 && std::chrono::steady_clock::now() - started >= std::chrono::seconds(run_seconds)) break;
  }
  server.stop();
  std::signal(SIGINT, prev_int);
  std::signal(SIGTERM, prev_term);
}

void cmd_export(Run& r) {
  const fs::path storage = r.s.required("storage");
  if (!fs::is_directory(storage / "sessions")) throw UsageError("no session store in " + storage.string());
  r.input("storage", storage);
  ExportFilter f;
  f.since = r.s.maybe_str("since");
  f.until = r.s.maybe_str("until");
  f.include_partial = r.s.flag("include_partial", false);
  // Export never generates text; the gateway is only needed to open the store.
  auto gw = std::make_shared<ChatGateway>(ScriptedChatBackend::always_failing());
  ServiceOptions so = service_options(r, storage);
  so.alert = nullptr;
  const SessionService service(gw, so);
  r.set_out_dir(r.s.required("out"));
  const SessionExport ex = service.export_sessions(f);
  write_transcripts(*r.out_dir / "transcripts.jsonl", ex.transcripts);
  std::string surveys;
  for (const auto& s : ex.surveys) surveys += json(s).dump() + "\n";
  write_text(*r.out_dir / "surveys.jsonl", surveys);
  r.produced("transcripts.jsonl");
  r.produced("surveys.jsonl");
  r.out << "exported " << ex.transcripts.size() << " session(s), " << ex.surveys.size()
        << " survey(s) -> " << r.out_dir->string() << "\n";
}

void cmd_review(Run& r) {
  const Batch b = load_batch(r, "batch", r.s.required("batch"), false);
  r.set_out_dir(r.s.required("out"));
  write_review_export(*r.out_dir, b.transcripts);
  r.produced("index.csv");
  r.out << "wrote " << b.transcripts.size() << " transcript(s) for review -> " << r.out_dir->string() << "\n";
}

// ---- command table ---------------------------------------------------------

void add_provider_options(CLI::App* c) {
  c->add_option("--provider", "Chat provider: mock or http (default mock)");
  c->add_option("--base-url", "Chat service base URL for --provider http");
  c->add_option("--model", "Chat model id for --provider http");
  c->add_option("--api-key-env", "Environment variable holding the chat API key (default WOZLAB_API_KEY)");
  c->add_option("--timeout-ms", "Per-request timeout");
  c->add_option("--max-in-flight", "Concurrent request cap");
  c->add_option("--requests-per-second", "Request rate cap, 0 for none");
  c->add_option("--mock-salt", "Varies the mock provider's phrase choice");
}

void add_lda_options(CLI::App* c) {
  c->add_option("--topics", "LDA topic count (default 5)");
  c->add_option("--lda-alpha", "LDA document-topic prior (default 50/topics)");
  c->add_option("--lda-beta", "LDA topic-word prior (default 0.01)");
  c->add_option("--iterations", "Gibbs sweeps (default 1000)");
  c->add_option("--lda-seed", "Sampler seed (default 1)");
  c->add_option("--top-n", "Terms per table (default 15)");
}

using Command = void (*)(Run&);

struct CommandSpec {
  const char* name;
  const char* help;
  Command run;
  void (*options)(CLI::App*);
};

const CommandSpec kCommands[] = {
    {"simulate", "Run a batch of closed-loop conversations", cmd_simulate,
     [](CLI::App* c) {
       c->add_option("--n", "Number of conversations");
       c->add_option("--seed", "Batch seed (default 0)");
       c->add_flag("--stratified", "Cycle through the 27 factor cells instead of drawing factors");
       c->add_option("--parallelism", "Concurrent conversations (default 1)");
       c->add_option("--turn-limit", "Exchanges per conversation (default 12)");
       c->add_option("--batch-id", "Prefix for transcript ids (default batch)");
       c->add_option("--word-limit", "Prompted word limit used for notes (default 80)");
       c->add_option("--max-attempts", "Attempts per provider call (default 3)");
       c->add_option("--timestamps", "logical or wall (default logical)");
       c->add_option("--demographics", "Demographic distribution file");
       c->add_option("--out", "Output directory");
       add_provider_options(c);
     }},
    {"evaluate", "Score every message of a transcript batch", cmd_evaluate,
     [](CLI::App* c) {
       c->add_option("--in", "Transcript file or batch directory");
       c->add_option("--out", "Output directory");
       c->add_option("--parallelism", "Concurrent transcripts (default 1)");
       c->add_option("--toxicity-threshold", "is_toxic cutoff (default 0.5)");
       c->add_option("--readability-profile", "default or recalibrated (default recalibrated)");
       c->add_option("--embedding-provider", "mock, http or none (default mock)");
       c->add_option("--embedding-url", "Embedding service base URL");
       c->add_option("--embedding-model", "Embedding model id");
       c->add_option("--embedding-dim", "Embedding dimension (default 384)");
       c->add_option("--embedding-api-key-env", "Environment variable holding the embedding key");
       c->add_option("--toxicity-provider", "mock, http or none (default mock)");
       c->add_option("--toxicity-url", "Toxicity service base URL");
       c->add_option("--toxicity-api-key-env", "Environment variable holding the toxicity key");
       c->add_option("--toxicity-table", "JSON object of text to score for the mock scorer");
       c->add_option("--toxicity-baseline", "Mock score for unlisted texts (default 0.01)");
       c->add_option("--max-in-flight", "Concurrent request cap");
       c->add_option("--requests-per-second", "Request rate cap, 0 for none");
     }},
    {"topics", "Fit topic models per interlocutor group", cmd_topics,
     [](CLI::App* c) {
       c->add_option("--batch", "Batch directory or transcript file");
       c->add_option("--dimension", "Demographic dimension to group by");
       c->add_option("--value", "Single group value (default all)");
       c->add_option("--speaker", "Whose messages: wizard, simulacrum or participant (default wizard)");
       c->add_option("--demographics", "Demographic distribution file");
       c->add_option("--out", "Output directory");
       add_lda_options(c);
     }},
    {"stats", "Descriptive statistics and tests for one metric", cmd_stats,
     [](CLI::App* c) {
       c->add_option("--batch", "Evaluated batch directory");
       c->add_option("--metric", "Metric name, e.g. lcs_sim_prev_own");
       c->add_option("--by", "segment, factor or group (default segment)");
       c->add_option("--speaker", "wizard, interlocutor or any (default wizard)");
       c->add_option("--unit", "conversation or message (default conversation)");
       c->add_option("--dimension", "Grouping dimension for --by group (default all)");
       c->add_option("--alpha", "Significance level (default 0.05)");
       c->add_option("--out", "Optional output directory");
     }},
    {"report", "Build the batch report with failure flags", cmd_report,
     [](CLI::App* c) {
       c->add_option("--batch", "Evaluated batch directory");
       c->add_option("--out", "Output directory");
       c->add_option("--batch-id", "Report id (default batch directory name)");
       c->add_option("--alpha", "Significance level (default 0.05)");
       c->add_option("--role-switch-threshold", "lcsseq cutoff for role switches (default 0.95)");
       c->add_option("--unit", "conversation or message (default conversation)");
       c->add_flag("--no-topics", "Skip topic tables");
       c->add_option("--demographics", "Demographic distribution file");
       add_lda_options(c);
     }},
    {"compare", "Compare two evaluated batches", cmd_compare,
     [](CLI::App* c) {
       c->add_option("--a", "First evaluated batch directory");
       c->add_option("--b", "Second evaluated batch directory");
       c->add_option("--a-label", "Label for the first batch (default a)");
       c->add_option("--b-label", "Label for the second batch (default b)");
       c->add_option("--out", "Output directory");
       c->add_option("--alpha", "Significance level (default 0.05)");
       c->add_option("--role-switch-threshold", "Unused by compare; accepted for shared configs");
       c->add_option("--unit", "conversation or message (default conversation)");
       c->add_flag("--no-topics", "Accepted for shared configs");
       add_lda_options(c);
     }},
    {"serve", "Host chat sessions for human participants", cmd_serve,
     [](CLI::App* c) {
       c->add_option("--host", "Bind address (default 127.0.0.1)");
       c->add_option("--port", "Port, 0 for any (default 8080)");
       c->add_option("--storage", "Session store directory (default wozlab-sessions)");
       c->add_option("--typing-delay-ms", "Delay before each wizard reply (default 0)");
       c->add_option("--abandon-minutes", "Idle time before a session is abandoned (default 30)");
       c->add_option("--sweep-seconds", "Abandonment check interval (default 60)");
       c->add_option("--turn-limit", "Exchanges per session (default 12)");
       c->add_option("--seed", "Seed for the wizard persona");
       c->add_option("--instrument", "Survey instrument file");
       c->add_option("--demographics", "Demographic options file for survey validation");
       c->add_option("--run-seconds", "Stop after this many seconds, 0 to run until signalled");
       add_provider_options(c);
     }},
    {"export", "Export finished sessions as transcripts", cmd_export,
     [](CLI::App* c) {
       c->add_option("--storage", "Session store directory");
       c->add_option("--out", "Output directory");
       c->add_option("--since", "Earliest creation date or timestamp");
       c->add_option("--until", "Latest creation date or timestamp");
       c->add_flag("--include-partial", "Include abandoned and unfinished sessions");
       c->add_option("--demographics", "Demographic options file");
     }},
    {"review", "Write plain-text transcripts for expert review", cmd_review,
     [](CLI::App* c) {
       c->add_option("--batch", "Batch directory or transcript file");
       c->add_option("--out", "Output directory");
     }},
};

EnvLookup process_env() {
  return [](const std::string& name) -> std::optional<std::string> {
    if (const char* v = std::getenv(name.c_str())) return std::string(v);
    return std::nullopt;
  };
}

json error_record(const std::string& command, const std::string& kind, const std::string& message) {
  return {{"command", command}, {"kind", kind}, {"message", message}};
}

}  // namespace

DispatchResult dispatch(const std::vector<std::string>& args, const DispatchContext& ctx) {
  std::ostream& out = *ctx.out;
  std::ostream& err = *ctx.err;
  const EnvLookup env = ctx.env ? ctx.env : process_env();

  CLI::App app{"Wizard-of-Oz experiments with language-model wizards", "wozlab"};
  app.set_version_flag("--version", kToolVersion);
  app.add_option("--config", "JSON config file; values apply below flags and environment");
  app.require_subcommand(1);
  for (const auto& spec : kCommands) spec.options(app.add_subcommand(spec.name, spec.help));

  std::vector<std::string> argv_store{"wozlab"};
  argv_store.insert(argv_store.end(), args.begin(), args.end());
  std::vector<char*> argv;
  for (auto& a : argv_store) argv.push_back(a.data());

  DispatchResult result;
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return result;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return result;
  } catch (const CLI::CallForVersion&) {
    out << kToolVersion << "\n";
    return result;
  } catch (const CLI::ParseError& e) {
    err << "usage error: " << e.what() << "\n";
    result.exit_code = 2;
    return result;
  }

  const CLI::App* sub = app.get_subcommands().front();
  const CommandSpec* spec = nullptr;
  for (const auto& c : kCommands)
    if (sub->get_name() == c.name) spec = &c;

  const auto started = utc_now();
  std::optional<Settings> settings;
  std::optional<Run> run;
  try {
    json file = json::object();
    std::optional<std::string> config_path;
    if (const auto* opt = app.get_option("--config"); opt->count() > 0)
      config_path = opt->as<std::string>();
    else if (auto v = env("WOZLAB_CONFIG"))
      config_path = *v;
    if (config_path) file = Settings::load_file(*config_path);

    settings.emplace(*sub, file, env);
    run.emplace(Run{out, err, env, *settings, json::object(), std::nullopt, {}});
    run->manifest = {{"tool", "wozlab"},
                     {"tool_version", kToolVersion},
                     {"command", spec->name},
                     {"argv", args},
                     {"config_file", config_path ? json(*config_path) : json(nullptr)},
                     {"seeds", json::object()},
                     {"inputs", json::object()},
                     {"providers", json::object()},
                     {"started_at", started}};
    spec->run(*run);
    run->manifest["config"] = settings->resolved();
    run->manifest["outputs"]["files"] = run->outputs;
    run->manifest["finished_at"] = utc_now();
    run->manifest["status"] = "ok";
    if (run->out_dir) write_manifest(*run->out_dir, run->manifest, spec->run != cmd_simulate);
    result.manifest = run->manifest;
    return result;
  } catch (const UsageError& e) {
    err << "usage error: " << e.what() << "\nRun 'wozlab " << sub->get_name() << " --help' for options.\n";
    result.exit_code = 2;
    return result;
  } catch (const ProvenanceMismatchError& e) {
    json rec = error_record(spec->name, to_string(e.kind()), e.what());
    rec["diff"] = e.diff();
    result.manifest = json{{"error", rec}};
    if (run) run->manifest["error"] = rec;
    err << json{{"error", rec}}.dump() << "\n";
  } catch (const Error& e) {
    const json rec = error_record(spec->name, to_string(e.kind()), e.what());
    if (run) run->manifest["error"] = rec;
    err << json{{"error", rec}}.dump() << "\n";
  } catch (const std::exception& e) {
    const json rec = error_record(spec->name, "internal", e.what());
    if (run) run->manifest["error"] = rec;
    err << json{{"error", rec}}.dump() << "\n";
  }
  result.exit_code = 1;
  if (run) {
    run->manifest["config"] = run->s.resolved();
    run->manifest["outputs"]["files"] = run->outputs;
    run->manifest["finished_at"] = utc_now();
    run->manifest["status"] = "failed";
    result.manifest = run->manifest;
    if (run->out_dir) {
      try {
        write_manifest(*run->out_dir, run->manifest, spec->run != cmd_simulate);
      } catch (const std::exception&) {
      }
    }
  }
  return result;
}

}  // namespace wozlab::cli
