#include "attnsel/domainrel.hpp"

#include <json.hpp>

#include <algorithm>
#include <fstream>
#include <ostream>
#include <sstream>
#include <thread>

#include "attnsel/common.hpp"
#include "attnsel/featsel.hpp"

namespace attnsel::domainrel {

using nlohmann::json;

std::string_view to_string(Relation r) {
  switch (r) {
    case Relation::FormOf: return "FormOf";
    case Relation::HasContext: return "HasContext";
    case Relation::IsA: return "IsA";
  }
  return "?";
}

std::optional<Relation> parse_relation(std::string_view s) {
  if (s.starts_with("/r/")) s.remove_prefix(3);
  if (s == "FormOf") return Relation::FormOf;
  if (s == "HasContext") return Relation::HasContext;
  if (s == "IsA") return Relation::IsA;
  return std::nullopt;
}

std::optional<std::string> concept_for_word(std::string_view word) {
  if (word.empty()) return std::nullopt;
  for (char ch : word) {
    if (ch == ' ' || ch == '\t' || ch == '_' || ch == '/') return std::nullopt;
  }
  return "/c/en/" + corpus::to_lower(word);
}

std::string normalize_concept(std::string_view uri) {
  // /c/<lang>/<term>[/<pos>[/...]]
  std::size_t slashes = 0;
  for (std::size_t i = 0; i < uri.size(); ++i) {
    if (uri[i] == '/' && ++slashes == 4) return std::string(uri.substr(0, i));
  }
  return std::string(uri);
}

bool is_valid_concept(std::string_view id) {
  if (!id.starts_with("/c/")) return false;
  const auto lang_end = id.find('/', 3);
  if (lang_end == std::string_view::npos || lang_end == 3) return false;
  const auto term = id.substr(lang_end + 1);
  if (term.empty() || term.front() == '/') return false;
  return std::none_of(term.begin(), term.end(), [](char c) { return c == ' ' || c == '\t'; });
}

bool is_english(std::string_view node) { return node.starts_with("/c/en/"); }

// ---- in-memory ------------------------------------------------------------

void InMemoryGraph::add_node(const std::string& node) { nodes_.insert(normalize_concept(node)); }

void InMemoryGraph::add_edge(Relation rel, const std::string& start, const std::string& end) {
  const auto s = normalize_concept(start);
  const auto e = normalize_concept(end);
  nodes_.insert(s);
  nodes_.insert(e);
  if (out_[{s, rel}].insert(e).second) ++edges_;
}

InMemoryGraph InMemoryGraph::load_edge_dump(const std::string& path) {
  std::ifstream in(path);
  if (!in) data_error("cannot read edge dump " + path);
  InMemoryGraph g;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    std::vector<std::string> cols;
    std::istringstream fields(line);
    for (std::string col; std::getline(fields, col, '\t');) cols.push_back(col);
    std::string rel, start, end;
    if (cols.size() >= 4 && cols[0].starts_with("/a/")) {
      rel = cols[1];
      start = cols[2];
      end = cols[3];
    } else if (cols.size() == 3) {
      rel = cols[0];
      start = cols[1];
      end = cols[2];
    } else {
      data_error(path + ":" + std::to_string(lineno) + ": expected 3 or 5 tab-separated columns");
    }
    const auto r = parse_relation(rel);
    if (!r || !is_english(start) || !is_english(end)) continue;
    if (!is_valid_concept(start) || !is_valid_concept(end)) {
      data_error(path + ":" + std::to_string(lineno) + ": invalid node identifier");
    }
    g.add_edge(*r, start, end);
  }
  return g;
}

bool InMemoryGraph::has_node(const std::string& node) { return nodes_.contains(normalize_concept(node)); }

std::vector<std::string> InMemoryGraph::related(const std::string& node, Relation rel) {
  auto it = out_.find({normalize_concept(node), rel});
  if (it == out_.end()) return {};
  return {it->second.begin(), it->second.end()};
}

// ---- live client ----------------------------------------------------------

namespace {

std::string url_encode(std::string_view s) {
  static constexpr char hex[] = "0123456789ABCDEF";
  std::string out;
  for (unsigned char c : s) {
    if (std::isalnum(c) || c == '-' || c == '_' || c == '.' || c == '~' || c == '/') {
      out.push_back(static_cast<char>(c));
    } else {
      out.push_back('%');
      out.push_back(hex[c >> 4]);
      out.push_back(hex[c & 0xF]);
    }
  }
  return out;
}

bool retryable(int status) { return status == 0 || status == 429 || status >= 500; }

}  // namespace

ConceptNetClient::ConceptNetClient(HttpFetcher fetch, LiveOptions options)
    : fetch_(std::move(fetch)), options_(std::move(options)) {
  if (!(options_.requests_per_second > 0.0)) config_error("requests_per_second must be > 0");
  if (!options_.sleep) options_.sleep = [](std::chrono::milliseconds d) { std::this_thread::sleep_for(d); };
}

std::size_t ConceptNetClient::requests_made() const {
  std::lock_guard lock(gate_);
  return requests_;
}

std::string ConceptNetClient::get(const std::string& path_and_query) {
  auto backoff = options_.initial_backoff;
  const auto spacing = std::chrono::milliseconds(static_cast<long>(1000.0 / options_.requests_per_second));
  HttpResponse resp;
  for (int attempt = 0; attempt <= options_.max_retries; ++attempt) {
    {
      std::lock_guard lock(gate_);
      const auto now = std::chrono::steady_clock::now();
      if (requests_ > 0 && now - last_request_ < spacing) {
        options_.sleep(std::chrono::duration_cast<std::chrono::milliseconds>(spacing - (now - last_request_)));
      }
      last_request_ = std::chrono::steady_clock::now();
      ++requests_;
      resp = fetch_(path_and_query);
    }
    if (resp.status == 200) return resp.body;
    if (!retryable(resp.status)) break;
    if (attempt < options_.max_retries) {
      options_.sleep(backoff);
      backoff *= 2;
    }
  }
  throw Error(ErrorKind::External, "knowledge-graph request failed (status " + std::to_string(resp.status) +
                                       "): " + path_and_query);
}

std::vector<std::string> ConceptNetClient::edge_targets(const std::string& query, Relation rel) {
  std::set<std::string> out;
  std::string next = query;
  for (std::size_t page = 0; page < options_.max_pages && !next.empty(); ++page) {
    json doc;
    try {
      doc = json::parse(get(next));
    } catch (const json::parse_error& e) {
      throw Error(ErrorKind::External, std::string("knowledge-graph returned malformed JSON: ") + e.what());
    }
    next.clear();
    for (const auto& edge : doc.value("edges", json::array())) {
      const auto r = parse_relation(edge.at("rel").value("@id", ""));
      if (r != rel) continue;
      const std::string end = edge.at("end").value("@id", "");
      if (is_english(end) && is_valid_concept(end)) out.insert(normalize_concept(end));
    }
    if (auto view = doc.find("view"); view != doc.end() && view->contains("nextPage")) {
      next = (*view)["nextPage"].get<std::string>();
    }
  }
  return {out.begin(), out.end()};
}

bool ConceptNetClient::has_node(const std::string& node) {
  json doc;
  try {
    doc = json::parse(get("/query?node=" + url_encode(normalize_concept(node)) + "&limit=1"));
  } catch (const json::parse_error& e) {
    throw Error(ErrorKind::External, std::string("knowledge-graph returned malformed JSON: ") + e.what());
  }
  const auto edges = doc.find("edges");
  return edges != doc.end() && edges->is_array() && !edges->empty();
}

std::vector<std::string> ConceptNetClient::related(const std::string& node, Relation rel) {
  const std::string query = "/query?start=" + url_encode(normalize_concept(node)) + "&rel=/r/" +
                            std::string(to_string(rel)) + "&limit=" + std::to_string(options_.page_limit);
  return edge_targets(query, rel);
}

// ---- cache ----------------------------------------------------------------

CachedGraph::CachedGraph(std::shared_ptr<KnowledgeGraph> inner, std::string cache_path, std::string source)
    : inner_(std::move(inner)), path_(std::move(cache_path)), source_(std::move(source)) {
  std::ifstream in(path_);
  if (!in) return;  // created on first write
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    try {
      const json rec = json::parse(line);
      // First write wins; later duplicates (from concurrent writers) are ignored.
      entries_.emplace(rec.at("key").get<std::string>(), rec.at("edges").get<std::vector<std::string>>());
    } catch (const json::exception& e) {
      data_error(path_ + ":" + std::to_string(lineno) + ": malformed cache entry: " + e.what());
    }
  }
}

std::vector<std::string> CachedGraph::lookup(const std::string& key,
                                             const std::function<std::vector<std::string>()>& fetch) {
  {
    std::shared_lock lock(mutex_);
    if (auto it = entries_.find(key); it != entries_.end()) return it->second;
  }
  auto edges = fetch();
  std::unique_lock lock(mutex_);
  auto [it, fresh] = entries_.emplace(key, edges);
  if (!fresh) return it->second;
  ++misses_;
  std::ofstream out(path_, std::ios::app);
  if (!out) data_error("cannot append to cache " + path_);
  const auto stamp = std::chrono::duration_cast<std::chrono::seconds>(
                         std::chrono::system_clock::now().time_since_epoch())
                         .count();
  out << json{{"key", key}, {"edges", edges}, {"timestamp", stamp}, {"source", source_}}.dump() << '\n';
  return it->second;
}

bool CachedGraph::has_node(const std::string& node) {
  const auto c = normalize_concept(node);
  const auto v = lookup("node|" + c, [&] {
    return inner_->has_node(c) ? std::vector<std::string>{c} : std::vector<std::string>{};
  });
  return !v.empty();
}

std::vector<std::string> CachedGraph::related(const std::string& node, Relation rel) {
  const auto c = normalize_concept(node);
  return lookup(std::string(to_string(rel)) + "|" + c, [&] { return inner_->related(c, rel); });
}

std::size_t CachedGraph::size() const {
  std::shared_lock lock(mutex_);
  return entries_.size();
}

std::size_t CachedGraph::misses() const {
  std::shared_lock lock(mutex_);
  return misses_;
}

// ---- relevance ------------------------------------------------------------

std::vector<std::string> resolve_roots(std::string_view word, KnowledgeGraph& kg) {
  const auto own = concept_for_word(word);
  if (!own) return {};
  auto roots = kg.related(*own, Relation::FormOf);
  if (!roots.empty()) return roots;
  if (kg.has_node(*own)) return {*own};
  return {};
}

std::optional<std::string> resolve_root(std::string_view word, KnowledgeGraph& kg) {
  auto roots = resolve_roots(word, kg);
  if (roots.empty()) return std::nullopt;
  return roots.front();
}

std::set<std::string> contexts_of(const std::string& node, KnowledgeGraph& kg) {
  std::set<std::string> out;
  for (const auto& ctx : kg.related(node, Relation::HasContext)) {
    out.insert(ctx);
    for (const auto& parent : kg.related(ctx, Relation::IsA)) out.insert(parent);
  }
  return out;
}

ConceptMapping load_mapping(const std::string& path) {
  std::ifstream in(path);
  if (!in) data_error("cannot read node mapping " + path);
  ConceptMapping mapping;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    const auto start = line.find_first_not_of(" \t");
    if (start == std::string::npos || line[start] == '#') continue;
    const auto sep = line.find_first_of(",\t", start);
    if (sep == std::string::npos) data_error(path + ":" + std::to_string(lineno) + ": expected 'code,node'");
    auto trim = [](std::string s) {
      const auto b = s.find_first_not_of(" \t");
      const auto e = s.find_last_not_of(" \t");
      return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
    };
    const std::string code = trim(line.substr(start, sep - start));
    const std::string node = trim(line.substr(sep + 1));
    if (code.empty() || !is_valid_concept(node)) {
      data_error(path + ":" + std::to_string(lineno) + ": invalid mapping '" + line + "'");
    }
    mapping[code].insert(normalize_concept(node));
  }
  return mapping;
}

std::size_t domain_relevance(const featsel::TermRanking& ranking, const std::string& category,
                             const ConceptMapping& mapping, KnowledgeGraph& kg, const RelevanceOptions& options) {
  if (options.n == 0) config_error("domain_relevance: n must be >= 1");
  auto it = mapping.find(category);
  if (it == mapping.end() || it->second.empty()) data_error("category '" + category + "' has no mapped concepts");
  const auto& targets = it->second;
  std::size_t taken = 0;
  std::size_t hits = 0;
  for (const auto& entry : ranking.entries()) {
    if (taken == options.n) break;
    const std::string& term = entry.term;
    if (!concept_for_word(term)) continue;
    if (options.prefilter && !featsel::is_rankable(term, *options.prefilter)) continue;
    ++taken;
    bool match = false;
    for (const auto& root : resolve_roots(term, kg)) {
      for (const auto& ctx : contexts_of(root, kg)) {
        if (targets.contains(ctx)) {
          match = true;
          break;
        }
      }
      if (match) break;
    }
    hits += match ? 1 : 0;
  }
  return hits;
}

DomainRelevanceReport relevance_report(const CategoryRankings& rankings, const ConceptMapping& mapping,
                                       KnowledgeGraph& kg, const RelevanceOptions& options) {
  DomainRelevanceReport report;
  report.n = options.n;
  for (const auto& [category, list] : rankings) {
    for (const auto& r : list) {
      report.rows.push_back({category, r.tag().str(), domain_relevance(r, category, mapping, kg, options)});
    }
  }
  return report;
}

DomainRelevanceReport relevance_report(const std::vector<featsel::TermRanking>& rankings,
                                       const ConceptMapping& mapping, KnowledgeGraph& kg,
                                       const RelevanceOptions& options) {
  if (mapping.empty()) data_error("node mapping is empty");
  CategoryRankings per;
  for (const auto& [category, _] : mapping) per[category] = rankings;
  return relevance_report(per, mapping, kg, options);
}

void write_report_table(std::ostream& out, const DomainRelevanceReport& report) {
  std::vector<std::string> methods;
  std::vector<std::string> categories;
  std::map<std::pair<std::string, std::string>, std::size_t> cell;
  for (const auto& row : report.rows) {
    if (std::find(methods.begin(), methods.end(), row.method) == methods.end()) methods.push_back(row.method);
    if (std::find(categories.begin(), categories.end(), row.category) == categories.end()) {
      categories.push_back(row.category);
    }
    cell[{row.category, row.method}] = row.count;
  }
  out << "category";
  for (const auto& m : methods) out << '\t' << m;
  out << '\n';
  std::vector<std::size_t> totals(methods.size(), 0);
  for (const auto& c : categories) {
    out << c;
    for (std::size_t i = 0; i < methods.size(); ++i) {
      auto it = cell.find({c, methods[i]});
      if (it == cell.end()) {
        out << "\t-";
      } else {
        out << '\t' << it->second;
        totals[i] += it->second;
      }
    }
    out << '\n';
  }
  out << "Total";
  for (auto t : totals) out << '\t' << t;
  out << '\n';
}

}  // namespace attnsel::domainrel
