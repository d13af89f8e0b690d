#include <doctest.h>

#include <map>
#include <sstream>

#include "attnsel/common.hpp"
#include "attnsel/domainrel.hpp"
#include "fixtures.hpp"

using namespace attnsel;
using namespace attnsel::domainrel;
using featsel::TermRanking;

namespace {

TermRanking ranking_of(std::vector<std::string> terms, featsel::Method m = featsel::Method::Chi) {
  std::vector<featsel::ScoredTerm> e;
  double s = double(terms.size());
  for (auto& t : terms) e.push_back({t, s--});
  return TermRanking({m, featsel::Weighting::None}, std::move(e));
}

std::string edges_json(const std::vector<std::pair<std::string, std::string>>& edges, const std::string& next = "") {
  std::string out = "{\"edges\":[";
  for (std::size_t i = 0; i < edges.size(); ++i) {
    out += (i ? "," : "") + std::string("{\"rel\":{\"@id\":\"") + edges[i].first + "\"},\"end\":{\"@id\":\"" +
           edges[i].second + "\"}}";
  }
  out += "]";
  if (!next.empty()) out += ",\"view\":{\"nextPage\":\"" + next + "\"}";
  return out + "}";
}

/// Scripted fetcher: returns queued responses per path and records calls.
struct FakeServer {
  std::map<std::string, std::vector<HttpResponse>> script;
  std::vector<std::string> calls;

  HttpFetcher fetcher() {
    return [this](const std::string& path) {
      calls.push_back(path);
      auto& queue = script[path];
      if (queue.empty()) return HttpResponse{200, "{\"edges\":[]}"};
      auto r = queue.front();
      if (queue.size() > 1) queue.erase(queue.begin());
      return r;
    };
  }
};

}  // namespace

TEST_CASE("node identifiers") {
  CHECK(concept_for_word("network") == "/c/en/network");
  CHECK_FALSE(concept_for_word("neural network").has_value());
  CHECK_FALSE(concept_for_word("").has_value());
  CHECK(normalize_concept("/c/en/network/n/wn/communication") == "/c/en/network");
  CHECK(is_english("/c/en/x"));
  CHECK_FALSE(is_english("/c/fr/x"));
  CHECK(parse_relation("/r/FormOf") == Relation::FormOf);
  CHECK(parse_relation("IsA") == Relation::IsA);
  CHECK_FALSE(parse_relation("/r/Synonym").has_value());
}

TEST_CASE("roots and contexts on the networking graph") {
  auto g = fixtures::networking_graph();
  CHECK(resolve_root("networking", g) == "/c/en/network");
  CHECK(resolve_root("network", g) == "/c/en/network");
  CHECK_FALSE(resolve_root("zzzz", g).has_value());
  CHECK(contexts_of("/c/en/network", g) ==
        std::set<std::string>{"/c/en/computer_science", "/c/en/electronics", "/c/en/physics"});
  CHECK(contexts_of("/c/en/the", g).empty());
}

TEST_CASE("domain relevance counts") {
  auto g = fixtures::networking_graph();
  const ConceptMapping mapping{{"08", {"/c/en/computer_science"}},
                               {"02", {"/c/en/physics"}},
                               {"06", {"/c/en/biology"}},
                               {"09", {"/c/en/electronics"}}};
  const auto r = ranking_of({"networking", "the", "proteins", "algorithm", "zzzz"});
  CHECK(domain_relevance(r, "08", mapping, g) == 2);
  CHECK(domain_relevance(r, "02", mapping, g) == 1);
  CHECK(domain_relevance(r, "06", mapping, g) == 1);
  CHECK(domain_relevance(r, "09", mapping, g) == 1);
  CHECK(domain_relevance(r, "08", mapping, g, {.n = 1}) == 1);
  CHECK_THROWS_AS(domain_relevance(r, "77", mapping, g), Error);

  // The prefilter runs before the cut, so "the" does not use up a slot.
  corpus::TokenizationPolicy stop;
  stop.stopwords = {"the"};
  const auto r2 = ranking_of({"the", "networking", "algorithm"});
  CHECK(domain_relevance(r2, "08", mapping, g, {.n = 2, .prefilter = &stop}) == 2);
  CHECK(domain_relevance(r2, "08", mapping, g, {.n = 2}) == 1);
}

TEST_CASE("property: relevance count never exceeds n and grows with n") {
  auto g = fixtures::networking_graph();
  const ConceptMapping mapping{{"08", {"/c/en/computer_science"}}};
  const auto r = ranking_of({"networking", "algorithm", "network", "the", "proteins", "x"});
  std::size_t prev = 0;
  for (std::size_t n = 1; n <= 8; ++n) {
    const auto c = domain_relevance(r, "08", mapping, g, {.n = n});
    CHECK(c <= n);
    CHECK(c >= prev);
    prev = c;
  }
}

TEST_CASE("report table layout") {
  auto g = fixtures::networking_graph();
  const ConceptMapping mapping{{"08", {"/c/en/computer_science"}}, {"02", {"/c/en/physics"}}};
  const auto report = relevance_report(std::vector<TermRanking>{ranking_of({"networking", "algorithm"}),
                                                                ranking_of({"proteins"}, featsel::Method::Ig)},
                                       mapping, g, {.n = 10});
  std::ostringstream out;
  write_report_table(out, report);
  const auto text = out.str();
  CHECK(text.find("category\tchi\tig") != std::string::npos);
  CHECK(text.find("08\t2\t0") != std::string::npos);
  CHECK(text.find("02\t1\t0") != std::string::npos);
  CHECK(text.find("Total\t3\t0") != std::string::npos);
  CHECK_THROWS_AS(relevance_report(std::vector<TermRanking>{}, ConceptMapping{}, g), Error);
}

TEST_CASE("edge dump and mapping files") {
  fixtures::TempDir dir("kg");
  fixtures::write_text(dir.path() / "edges.tsv",
                       "# comment\n"
                       "/a/[x]\t/r/FormOf\t/c/en/networking/n\t/c/en/network\t{}\n"
                       "HasContext\t/c/en/network\t/c/en/computer_science\n"
                       "HasContext\t/c/fr/reseau\t/c/fr/informatique\n"
                       "Synonym\t/c/en/a\t/c/en/b\n");
  auto g = InMemoryGraph::load_edge_dump((dir.path() / "edges.tsv").string());
  CHECK(g.edge_count() == 2);
  CHECK(resolve_root("networking", g) == "/c/en/network");
  fixtures::write_text(dir.path() / "bad.tsv", "one\ttwo\n");
  CHECK_THROWS_AS(InMemoryGraph::load_edge_dump((dir.path() / "bad.tsv").string()), Error);

  fixtures::write_text(dir.path() / "map.csv", "# code,node\n08,/c/en/computer_science\n08\t/c/en/computing\n");
  const auto m = load_mapping((dir.path() / "map.csv").string());
  CHECK(m.at("08").size() == 2);
  fixtures::write_text(dir.path() / "badmap.csv", "08 computer\n");
  CHECK_THROWS_AS(load_mapping((dir.path() / "badmap.csv").string()), Error);
}

TEST_CASE("live client retries with exponential backoff") {
  FakeServer server;
  const std::string q = "/query?start=/c/en/network&rel=/r/HasContext&limit=1000";
  server.script[q] = {{503, ""}, {429, ""}, {0, ""}, {200, edges_json({{"/r/HasContext", "/c/en/computer_science/n"}})}};
  std::vector<long> sleeps;
  LiveOptions opts;
  opts.requests_per_second = 1e6;
  opts.sleep = [&](std::chrono::milliseconds d) { sleeps.push_back(d.count()); };
  ConceptNetClient client(server.fetcher(), opts);
  CHECK(client.related("/c/en/network", Relation::HasContext) == std::vector<std::string>{"/c/en/computer_science"});
  CHECK(client.requests_made() == 4);
  std::vector<long> backoffs;
  for (long s : sleeps)
    if (s >= 500) backoffs.push_back(s);
  CHECK(backoffs == std::vector<long>{500, 1000, 2000});
}

TEST_CASE("live client gives up with an external error") {
  FakeServer server;
  const std::string q = "/query?start=/c/en/x&rel=/r/IsA&limit=1000";
  server.script[q] = {{500, ""}};
  LiveOptions opts;
  opts.max_retries = 2;
  opts.requests_per_second = 1e6;
  opts.sleep = [](std::chrono::milliseconds) {};
  ConceptNetClient client(server.fetcher(), opts);
  try {
    client.related("/c/en/x", Relation::IsA);
    FAIL("no error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::External);
  }
  CHECK(client.requests_made() == 3);

  server.script["/query?start=/c/en/y&rel=/r/IsA&limit=1000"] = {{404, ""}};
  CHECK_THROWS_AS(client.related("/c/en/y", Relation::IsA), Error);
  CHECK(client.requests_made() == 4);
}

TEST_CASE("live client follows pagination and filters edges") {
  FakeServer server;
  const std::string q = "/query?start=/c/en/network&rel=/r/HasContext&limit=1000";
  server.script[q] = {{200, edges_json({{"/r/HasContext", "/c/en/electronics"}, {"/r/IsA", "/c/en/thing"},
                                        {"/r/HasContext", "/c/de/netz"}},
                                       "/page2")}};
  server.script["/page2"] = {{200, edges_json({{"/r/HasContext", "/c/en/computer_science"}})}};
  LiveOptions opts;
  opts.requests_per_second = 1e6;
  opts.sleep = [](std::chrono::milliseconds) {};
  ConceptNetClient client(server.fetcher(), opts);
  CHECK(client.related("/c/en/network", Relation::HasContext) ==
        std::vector<std::string>{"/c/en/computer_science", "/c/en/electronics"});
  CHECK(server.calls.size() == 2);
}

TEST_CASE("rate gate spaces requests") {
  FakeServer server;
  std::vector<long> sleeps;
  LiveOptions opts;
  opts.requests_per_second = 2.0;
  opts.sleep = [&](std::chrono::milliseconds d) { sleeps.push_back(d.count()); };
  ConceptNetClient client(server.fetcher(), opts);
  client.has_node("/c/en/a");
  client.has_node("/c/en/b");
  client.has_node("/c/en/c");
  REQUIRE(sleeps.size() == 2);
  for (long s : sleeps) {
    CHECK(s > 400);
    CHECK(s <= 500);
  }
}

TEST_CASE("cache answers repeated queries without the backend") {
  fixtures::TempDir dir("cache");
  const auto path = (dir.path() / "kg-cache.jsonl").string();
  FakeServer server;
  server.script["/query?start=/c/en/network&rel=/r/HasContext&limit=1000"] = {
      {200, edges_json({{"/r/HasContext", "/c/en/electronics"}})}};
  LiveOptions opts;
  opts.requests_per_second = 1e6;
  opts.sleep = [](std::chrono::milliseconds) {};
  {
    auto client = std::make_shared<ConceptNetClient>(server.fetcher(), opts);
    CachedGraph cached(client, path);
    CHECK(cached.related("/c/en/network", Relation::HasContext) == std::vector<std::string>{"/c/en/electronics"});
    CHECK(cached.related("/c/en/network/n", Relation::HasContext) == std::vector<std::string>{"/c/en/electronics"});
    CHECK_FALSE(cached.has_node("/c/en/zzz"));
    CHECK(cached.misses() == 2);
    CHECK(client->requests_made() == 2);
  }
  // A fresh process reads the cache file and never calls out.
  FakeServer offline;
  auto client = std::make_shared<ConceptNetClient>(
      [&](const std::string&) -> HttpResponse { FAIL("network used"); return {}; }, opts);
  CachedGraph cached(client, path);
  CHECK(cached.size() == 2);
  CHECK(cached.related("/c/en/network", Relation::HasContext) == std::vector<std::string>{"/c/en/electronics"});
  CHECK_FALSE(cached.has_node("/c/en/zzz"));
  CHECK(client->requests_made() == 0);

  fixtures::write_text(dir.path() / "broken.jsonl", "{not json\n");
  CHECK_THROWS_AS(CachedGraph(client, (dir.path() / "broken.jsonl").string()), Error);
}

TEST_CASE("resolve_root is idempotent on the fixture graph") {
  auto g = fixtures::networking_graph();
  for (const char* w : {"networking", "network", "proteins", "algorithm", "the"}) {
    const auto r = resolve_root(w, g);
    REQUIRE(r.has_value());
    const auto word = r->substr(std::string("/c/en/").size());
    CHECK(resolve_root(word, g) == r);
  }
}
