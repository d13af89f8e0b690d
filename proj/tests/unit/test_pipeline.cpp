#include <doctest.h>

#include <fstream>
#include <iostream>
#include <json.hpp>
#include <sstream>

#include "attnsel/common.hpp"
#include "attnsel/pipeline.hpp"
#include "fixtures.hpp"

using namespace attnsel;
using namespace attnsel::pipeline;
namespace fs = std::filesystem;

namespace {

int cli(std::vector<std::string> args) {
  args.insert(args.begin(), "attnsel");
  std::vector<char*> argv;
  for (auto& a : args) argv.push_back(a.data());
  return pipeline::main(static_cast<int>(argv.size()), argv.data());
}

void run_all(const fs::path& config, unsigned jobs) {
  auto cfg = RunConfig::load(config.string());
  std::ostringstream log;
  RunOptions opts{.jobs = jobs, .log = &log};
  for (const auto& c : commands()) run(c, cfg, opts);
}

fixtures::PlantedShape small() { return {.documents = 60}; }

}  // namespace

TEST_CASE("config parsing") {
  fixtures::TempDir dir("cfg");
  const auto config = fixtures::write_planted_project(dir.path(), small());
  const auto cfg = RunConfig::load(config.string());
  CHECK(fs::path(cfg.corpus).is_absolute());
  CHECK(cfg.k_grid == std::vector<std::size_t>{25, 50});
  CHECK(cfg.hash() == RunConfig::load(config.string()).hash());
  auto other = cfg;
  other.seed = 43;
  CHECK(other.hash() != cfg.hash());
  auto moved = cfg;
  moved.output = "/elsewhere";
  CHECK(moved.hash() == cfg.hash());

  CHECK_THROWS_WITH_AS(RunConfig::from_json(nlohmann::json{{"colour", 1}}, "."), doctest::Contains("colour"), Error);
  CHECK_THROWS_AS(RunConfig::from_json(nlohmann::json{{"folds", "five"}}, "."), Error);
  auto bad = cfg;
  bad.folds = 1;
  CHECK_THROWS_AS(bad.validate("ingest"), Error);
  bad = cfg;
  bad.p_grid = {1.0};
  CHECK_THROWS_AS(bad.validate("compare"), Error);
  bad = cfg;
  bad.kg.backend = "none";
  CHECK_THROWS_AS(bad.validate("domains"), Error);
  CHECK_NOTHROW(cfg.validate("domains"));
}

TEST_CASE("builtin stopwords are embedded") {
  const auto text = builtin_stopwords_text();
  CHECK(text.find("\nthe\n") != std::string_view::npos);
}

TEST_CASE("full pipeline writes stamped artifacts") {
  fixtures::TempDir dir("run");
  const auto config = fixtures::write_planted_project(dir.path(), small());
  run_all(config, 1);
  const auto out = dir.path() / "out";
  const auto hash = RunConfig::load(config.string()).hash();
  for (const char* rel : {"ingest/corpus_summary.tsv", "ingest/folds.tsv", "attend/attended_vocabulary.tsv",
                          "rankings/attention.tsv", "rankings/chi.tsv", "rankings/chi+tfidf.tsv",
                          "rankings/attention+tf.tsv", "rankings/by_category/01/pd.tsv",
                          "compare/comparison.tsv", "domains/domain_relevance.tsv", "evaluate/evaluation.tsv",
                          "evaluate/stability.tsv", "report/summary.md"}) {
    INFO(rel);
    REQUIRE(fs::exists(out / rel));
    const auto text = fixtures::read_text(out / rel);
    if (!std::string(rel).ends_with(".md")) CHECK(text.starts_with("# config_hash=" + hash + "\n"));
  }
  for (const auto& c : commands()) {
    const auto manifest = nlohmann::json::parse(fixtures::read_text(out / ("manifest_" + c + ".json")));
    CHECK(manifest["config_hash"] == hash);
    CHECK_FALSE(manifest["artifacts"].empty());
  }
  const auto domains = fixtures::read_text(out / "domains/domain_relevance.tsv");
  CHECK(domains.find("\nTotal\t") != std::string::npos);
  // The first category's markers sit in its mapped domain.
  const auto longform = fixtures::read_text(out / "domains/domain_relevance_long.tsv");
  CHECK(longform.find("01\tchi\t50\t6\n") != std::string::npos);
  const auto summary = fixtures::read_text(out / "report/summary.md");
  CHECK(summary.find("## Classification") != std::string::npos);
}

TEST_CASE("thread count does not change artifacts") {
  fixtures::TempDir dir("jobs");
  const auto config = fixtures::write_planted_project(dir.path(), small());
  auto cfg = RunConfig::load(config.string());
  std::ostringstream log;
  for (unsigned jobs : {1u, 3u}) {
    cfg.output = (dir.path() / ("out" + std::to_string(jobs))).string();
    for (const auto& c : commands()) run(c, cfg, {.jobs = jobs, .log = &log});
  }
  std::size_t compared = 0;
  for (const auto& e : fs::recursive_directory_iterator(dir.path() / "out1")) {
    if (!e.is_regular_file()) continue;
    const auto rel = fs::relative(e.path(), dir.path() / "out1");
    CHECK_MESSAGE(fixtures::read_text(e.path()) == fixtures::read_text(dir.path() / "out3" / rel), rel.string());
    ++compared;
  }
  CHECK(compared > 20);
}

TEST_CASE("cli exit codes") {
  fixtures::TempDir dir("cli");
  const auto config = fixtures::write_planted_project(dir.path(), small());
  CHECK(cli({"ingest", "--config", config.string()}) == 0);
  CHECK(cli({"bogus", "--config", config.string()}) == 2);
  CHECK(cli({"ingest", "--config", (dir.path() / "missing.json").string()}) == 2);
  CHECK(cli({"ingest", "--config", config.string(), "--folds", "1"}) == 2);
  // compare before select: the rankings it needs are missing.
  CHECK(cli({"compare", "--config", config.string(), "--output", (dir.path() / "fresh").string()}) == 3);

  fixtures::write_text(dir.path() / "corpus.jsonl", "{\"id\":\"a\",\"title\":\"t\",\"abstract\":\"x\",\"categories\":[\"99\"]}\n");
  CHECK(cli({"ingest", "--config", config.string()}) == 3);
}

TEST_CASE("live backend failures exit with code 4") {
  fixtures::TempDir dir("live");
  const auto config = fixtures::write_planted_project(dir.path(), small());
  auto cfg = RunConfig::load(config.string());
  run("ingest", cfg, {.log = &std::cerr});
  std::ostringstream log;
  run("select", cfg, {.log = &log});
  cfg.kg.backend = "live";
  cfg.kg.endpoint = "http://127.0.0.1:9";  // discard port: connection refused
  cfg.kg.cache = (dir.path() / "cache.jsonl").string();
  cfg.kg.max_retries = 0;
  cfg.kg.timeout_ms = 200;
  try {
    run("domains", cfg, {.log = &log});
    FAIL("no error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::External);
  }
}

TEST_CASE("stdout mirrors the main artifact") {
  fixtures::TempDir dir("stdout");
  const auto config = fixtures::write_planted_project(dir.path(), small());
  const auto cfg = RunConfig::load(config.string());
  std::ostringstream out, log;
  run("ingest", cfg, {.to_stdout = true, .out = &out, .log = &log});
  CHECK(out.str() == fixtures::read_text(dir.path() / "out/ingest/corpus_summary.tsv"));
}

TEST_CASE("emitted f1 is the harmonic mean of emitted precision and recall") {
  fixtures::TempDir dir("f1");
  const auto config = fixtures::write_planted_project(dir.path(), small());
  const auto cfg = RunConfig::load(config.string());
  std::ostringstream log;
  run("evaluate", cfg, {.log = &log});
  std::istringstream in(fixtures::read_text(dir.path() / "out/evaluate/evaluation.tsv"));
  std::string line;
  std::size_t rows = 0;
  while (std::getline(in, line)) {
    if (line.starts_with("#") || line.starts_with("feature_method")) continue;
    std::vector<std::string> cells;
    std::istringstream f(line);
    for (std::string c; std::getline(f, c, '\t');) cells.push_back(c);
    REQUIRE(cells.size() == 9);
    const double p = std::stod(cells[5]), r = std::stod(cells[6]), f1 = std::stod(cells[7]);
    CHECK(f1 == doctest::Approx(p + r > 0 ? 2 * p * r / (p + r) : 0.0).epsilon(1e-8));
    ++rows;
  }
  CHECK(rows > 0);
}

TEST_CASE("report is reproducible") {
  fixtures::TempDir dir("report");
  const auto config = fixtures::write_planted_project(dir.path(), small());
  const auto cfg = RunConfig::load(config.string());
  std::ostringstream log;
  run("ingest", cfg, {.log = &log});
  run("report", cfg, {.log = &log});
  const auto first = fixtures::read_text(dir.path() / "out/report/summary.md");
  run("report", cfg, {.log = &log});
  CHECK(first == fixtures::read_text(dir.path() / "out/report/summary.md"));
  CHECK(first.find("attend: not run") != std::string::npos);
}
