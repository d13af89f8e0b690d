#pragma once

#include <chrono>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <shared_mutex>
#include <string>
#include <string_view>
#include <vector>

#include "attnsel/corpus.hpp"
#include "attnsel/ranking.hpp"

namespace attnsel::domainrel {

enum class Relation { FormOf, HasContext, IsA };
std::string_view to_string(Relation r);
std::optional<Relation> parse_relation(std::string_view s);  // "FormOf" or "/r/FormOf"

/// `/c/en/<word>` for a single lowercase word; nullopt for empty or multi-word terms.
std::optional<std::string> concept_for_word(std::string_view word);
/// Drops sense/POS suffixes: `/c/en/network/n/wn/...` -> `/c/en/network`.
std::string normalize_concept(std::string_view uri);
bool is_valid_concept(std::string_view id);
bool is_english(std::string_view node);

/// Read access to a ConceptNet-like graph. Implementations must be safe for
/// concurrent calls.
class KnowledgeGraph {
 public:
  virtual ~KnowledgeGraph() = default;
  virtual bool has_node(const std::string& node) = 0;
  /// Targets of outgoing `rel` edges from `node`, normalised, sorted, unique.
  virtual std::vector<std::string> related(const std::string& node, Relation rel) = 0;
};

/// Fixture / edge-dump backend held entirely in memory.
class InMemoryGraph final : public KnowledgeGraph {
 public:
  void add_node(const std::string& node);
  void add_edge(Relation rel, const std::string& start, const std::string& end);

  /// Reads ConceptNet assertion CSV rows (uri, rel, start, end, info) or
  /// plain `rel<TAB>start<TAB>end` rows; keeps English FormOf/HasContext/IsA edges.
  static InMemoryGraph load_edge_dump(const std::string& path);

  bool has_node(const std::string& node) override;
  std::vector<std::string> related(const std::string& node, Relation rel) override;

  std::size_t edge_count() const noexcept { return edges_; }

 private:
  std::set<std::string> nodes_;
  std::map<std::pair<std::string, Relation>, std::set<std::string>> out_;
  std::size_t edges_ = 0;
};

struct HttpResponse {
  int status = 0;  // 0 signals a transport failure
  std::string body;
};
using HttpFetcher = std::function<HttpResponse(const std::string& path_and_query)>;

/// Fetcher backed by cpp-httplib against `endpoint` (e.g. https://api.conceptnet.io).
HttpFetcher make_http_fetcher(const std::string& endpoint, std::chrono::milliseconds timeout);

struct LiveOptions {
  double requests_per_second = 1.0;
  int max_retries = 5;
  std::chrono::milliseconds initial_backoff{500};
  std::size_t page_limit = 1000;
  std::size_t max_pages = 20;
  /// Injected so tests can run the backoff schedule without waiting.
  std::function<void(std::chrono::milliseconds)> sleep;
};

/// Live ConceptNet REST backend. Throttled through a single gate; 429/5xx and
/// transport failures are retried with exponential backoff, then surface as
/// Error(External).
class ConceptNetClient final : public KnowledgeGraph {
 public:
  ConceptNetClient(HttpFetcher fetch, LiveOptions options);

  bool has_node(const std::string& node) override;
  std::vector<std::string> related(const std::string& node, Relation rel) override;

  std::size_t requests_made() const;

 private:
  std::string get(const std::string& path_and_query);
  std::vector<std::string> edge_targets(const std::string& query, Relation rel);

  HttpFetcher fetch_;
  LiveOptions options_;
  mutable std::mutex gate_;
  std::chrono::steady_clock::time_point last_request_{};
  std::size_t requests_ = 0;
};

/// Persistent append-only cache in front of another graph. Entries are
/// immutable once written; each query key is fetched at most once.
class CachedGraph final : public KnowledgeGraph {
 public:
  CachedGraph(std::shared_ptr<KnowledgeGraph> inner, std::string cache_path, std::string source = "live");

  bool has_node(const std::string& node) override;
  std::vector<std::string> related(const std::string& node, Relation rel) override;

  std::size_t size() const;
  std::size_t misses() const;

 private:
  std::vector<std::string> lookup(const std::string& key, const std::function<std::vector<std::string>()>& fetch);

  std::shared_ptr<KnowledgeGraph> inner_;
  std::string path_;
  std::string source_;
  mutable std::shared_mutex mutex_;
  std::map<std::string, std::vector<std::string>> entries_;
  std::size_t misses_ = 0;
};

/// Representative root node of `word`: the lexicographically smallest FormOf
/// target, else the word's own node; nullopt when the word has no node.
std::optional<std::string> resolve_root(std::string_view word, KnowledgeGraph& kg);
/// Every FormOf root (or the own node), sorted; empty when absent.
std::vector<std::string> resolve_roots(std::string_view word, KnowledgeGraph& kg);

/// HasContext targets of `node`, plus the IsA parents (one level) of each target.
std::set<std::string> contexts_of(const std::string& node, KnowledgeGraph& kg);

using ConceptMapping = std::map<std::string, std::set<std::string>>;
/// Lines `category_code,concept_id` (comma or tab); `#` comments allowed.
ConceptMapping load_mapping(const std::string& path);

struct RelevanceOptions {
  std::size_t n = 100;
  /// Terms dropped before taking the top n (stopwords, punctuation); multi-word
  /// terms are always dropped.
  const corpus::TokenizationPolicy* prefilter = nullptr;
};

/// Count of top-n terms whose contexts intersect the category's concepts.
std::size_t domain_relevance(const featsel::TermRanking& ranking, const std::string& category,
                             const ConceptMapping& mapping, KnowledgeGraph& kg, const RelevanceOptions& options = {});

struct DomainRelevanceReport {
  struct Row {
    std::string category;
    std::string method;
    std::size_t count = 0;
  };
  std::vector<Row> rows;
  std::size_t n = 100;
};

/// Rankings to score, keyed by category.
using CategoryRankings = std::map<std::string, std::vector<featsel::TermRanking>>;

DomainRelevanceReport relevance_report(const CategoryRankings& rankings, const ConceptMapping& mapping,
                                       KnowledgeGraph& kg, const RelevanceOptions& options = {});
/// Scores the same rankings against every mapped category.
DomainRelevanceReport relevance_report(const std::vector<featsel::TermRanking>& rankings,
                                       const ConceptMapping& mapping, KnowledgeGraph& kg,
                                       const RelevanceOptions& options = {});

/// Categories as rows, methods as columns, then a Total row.
void write_report_table(std::ostream& out, const DomainRelevanceReport& report);

}  // namespace attnsel::domainrel
