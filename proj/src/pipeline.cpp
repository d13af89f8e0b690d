#include "attnsel/pipeline.hpp"

#include <CLI11.hpp>
#include <fmt/format.h>

#include <algorithm>
#include <fstream>
#include <iostream>
#include <map>
#include <memory>
#include <set>
#include <sstream>

#include "attnsel/attention.hpp"
#include "attnsel/common.hpp"
#include "attnsel/domainrel.hpp"
#include "attnsel/featsel.hpp"
#include "attnsel/parallel.hpp"
#include "attnsel/rankcmp.hpp"

namespace attnsel::pipeline {

namespace fs = std::filesystem;
using nlohmann::json;

// ---- config -----------------------------------------------------------------

namespace {

std::string resolve(const fs::path& base, const std::string& p) {
  if (p.empty() || p.starts_with("builtin:")) return p;
  const fs::path path(p);
  return (path.is_absolute() ? path : base / path).lexically_normal().string();
}

template <typename T>
void take(const json& j, const char* key, T& field) {
  if (auto it = j.find(key); it != j.end()) {
    try {
      field = it->get<T>();
    } catch (const json::exception& e) {
      config_error(std::string("config field '") + key + "': " + e.what());
    }
  }
}

void reject_unknown(const json& j, std::initializer_list<const char*> known, const std::string& where) {
  for (const auto& [key, _] : j.items()) {
    if (std::none_of(known.begin(), known.end(), [&](const char* k) { return key == k; })) {
      config_error("unknown config key '" + where + key + "'");
    }
  }
}

}  // namespace

RunConfig RunConfig::from_json(const json& j, const fs::path& base_dir) {
  if (!j.is_object()) config_error("config must be a JSON object");
  reject_unknown(j,
                 {"corpus", "taxonomy", "dumps", "stopwords", "mapping", "output", "level", "lowercase", "min_df",
                  "folds", "seed", "methods", "weightings", "p_grid", "overlap_k", "top_n", "k_grid", "features",
                  "models", "classifiers", "kg"},
                 "");
  RunConfig c;
  take(j, "corpus", c.corpus);
  take(j, "taxonomy", c.taxonomy);
  take(j, "dumps", c.dumps);
  take(j, "stopwords", c.stopwords);
  take(j, "mapping", c.mapping);
  take(j, "output", c.output);
  take(j, "level", c.level);
  take(j, "lowercase", c.lowercase);
  take(j, "min_df", c.min_df);
  take(j, "folds", c.folds);
  take(j, "seed", c.seed);
  take(j, "methods", c.methods);
  take(j, "weightings", c.weightings);
  take(j, "p_grid", c.p_grid);
  take(j, "overlap_k", c.overlap_k);
  take(j, "top_n", c.top_n);
  take(j, "k_grid", c.k_grid);
  take(j, "features", c.features);
  take(j, "models", c.models);
  if (auto it = j.find("classifiers"); it != j.end()) {
    reject_unknown(*it, {"nb_alpha", "lr_l2", "lr_epochs", "lr_step"}, "classifiers.");
    take(*it, "nb_alpha", c.nb_alpha);
    take(*it, "lr_l2", c.logreg.l2);
    take(*it, "lr_epochs", c.logreg.epochs);
    take(*it, "lr_step", c.logreg.step);
  }
  if (auto it = j.find("kg"); it != j.end()) {
    reject_unknown(*it, {"backend", "edges", "cache", "endpoint", "requests_per_second", "max_retries", "timeout_ms"},
                   "kg.");
    take(*it, "backend", c.kg.backend);
    take(*it, "edges", c.kg.edges);
    take(*it, "cache", c.kg.cache);
    take(*it, "endpoint", c.kg.endpoint);
    take(*it, "requests_per_second", c.kg.requests_per_second);
    take(*it, "max_retries", c.kg.max_retries);
    take(*it, "timeout_ms", c.kg.timeout_ms);
  }
  for (auto* p : {&c.corpus, &c.taxonomy, &c.dumps, &c.stopwords, &c.mapping, &c.output, &c.kg.edges, &c.kg.cache}) {
    *p = resolve(base_dir, *p);
  }
  c.logreg.seed = c.seed;
  return c;
}

RunConfig RunConfig::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) config_error("cannot read config " + path);
  json j;
  try {
    j = json::parse(in, nullptr, true, /*ignore_comments=*/true);
  } catch (const json::parse_error& e) {
    config_error("config " + path + ": " + e.what());
  }
  return from_json(j, fs::absolute(path).parent_path());
}

json RunConfig::to_json() const {
  return json{
      {"corpus", corpus},
      {"taxonomy", taxonomy},
      {"dumps", dumps},
      {"stopwords", stopwords},
      {"mapping", mapping},
      {"output", output},
      {"level", level},
      {"lowercase", lowercase},
      {"min_df", min_df},
      {"folds", folds},
      {"seed", seed},
      {"methods", methods},
      {"weightings", weightings},
      {"p_grid", p_grid},
      {"overlap_k", overlap_k},
      {"top_n", top_n},
      {"k_grid", k_grid},
      {"features", features},
      {"models", models},
      {"classifiers",
       {{"nb_alpha", nb_alpha}, {"lr_l2", logreg.l2}, {"lr_epochs", logreg.epochs}, {"lr_step", logreg.step}}},
      {"kg",
       {{"backend", kg.backend},
        {"edges", kg.edges},
        {"cache", kg.cache},
        {"endpoint", kg.endpoint},
        {"requests_per_second", kg.requests_per_second},
        {"max_retries", kg.max_retries},
        {"timeout_ms", kg.timeout_ms}}},
  };
}

std::string RunConfig::hash() const {
  // Output location does not change artifact contents.
  json j = to_json();
  j.erase("output");
  return hash_hex(j.dump());
}

void RunConfig::validate(const std::string& command) const {
  if (std::find(commands().begin(), commands().end(), command) == commands().end()) {
    config_error("unknown command '" + command + "'");
  }
  auto require_file = [](const std::string& field, const std::string& path) {
    if (path.empty()) config_error("config field '" + field + "' is required");
    if (!fs::exists(path)) config_error("config field '" + field + "': path does not exist: " + path);
  };
  auto check_optional = [](const std::string& field, const std::string& path) {
    if (!path.empty() && !path.starts_with("builtin:") && !fs::exists(path)) {
      config_error("config field '" + field + "': path does not exist: " + path);
    }
  };
  require_file("corpus", corpus);
  require_file("taxonomy", taxonomy);
  if (stopwords.starts_with("builtin:") && stopwords != kBuiltinStopwords) {
    config_error("unknown builtin stopword list '" + stopwords + "'");
  }
  check_optional("stopwords", stopwords);
  check_optional("dumps", dumps);
  check_optional("mapping", mapping);
  check_optional("kg.edges", kg.edges);
  if (output.empty()) config_error("config field 'output' is required");
  if (level != 1 && level != 2) config_error("level must be 1 or 2");
  if (folds < 2) config_error("folds must be >= 2");
  if (min_df < 1) config_error("min_df must be >= 1");
  if (methods.empty()) config_error("methods must be non-empty");
  for (const auto& m : methods) {
    if (featsel::parse_method(m) == featsel::Method::Attention) config_error("'attention' is implied by dumps");
  }
  for (const auto& w : weightings) {
    if (featsel::parse_weighting(w) == featsel::Weighting::None) config_error("weightings lists tf and/or tfidf");
  }
  if (p_grid.empty()) config_error("p_grid must be non-empty");
  for (double p : p_grid) {
    if (!(p > 0.0 && p < 1.0)) config_error("p_grid values must lie in (0, 1)");
  }
  if (k_grid.empty()) config_error("k_grid must be non-empty");
  for (auto k : k_grid) {
    if (k == 0) config_error("k_grid values must be >= 1");
  }
  if (top_n == 0) config_error("top_n must be >= 1");
  if (features.empty() || models.empty()) config_error("features and models must be non-empty");
  for (const auto& f : features) classify::parse_feature_weighting(f);
  for (const auto& m : models) classify::parse_model_kind(m);
  if (!(nb_alpha > 0.0)) config_error("classifiers.nb_alpha must be > 0");
  if (logreg.l2 < 0.0 || !(logreg.step > 0.0) || logreg.epochs < 1) config_error("invalid logistic regression settings");

  if (command == "attend") require_file("dumps", dumps);
  if (command == "domains") {
    require_file("mapping", mapping);
    if (kg.backend == "dump") {
      require_file("kg.edges", kg.edges);
    } else if (kg.backend == "live") {
      if (kg.cache.empty()) config_error("kg.cache is required for the live backend");
      if (!(kg.requests_per_second > 0.0)) config_error("kg.requests_per_second must be > 0");
    } else {
      config_error("domains needs kg.backend 'dump' or 'live'");
    }
  }
}

// ---- run context ------------------------------------------------------------

namespace {

class Context {
 public:
  Context(const RunConfig& config, const RunOptions& options)
      : config_(config),
        options_(options),
        hash_(config.hash()),
        out_dir_(config.output),
        log_(options.log ? *options.log : std::cerr),
        out_(options.out ? *options.out : std::cout) {}

  const RunConfig& config() const { return config_; }
  unsigned jobs() const { return std::max(1u, options_.jobs); }
  const std::string& config_hash() const { return hash_; }
  const fs::path& out_dir() const { return out_dir_; }
  std::ostream& log() { return log_; }

  void info(const std::string& msg) { log_ << "attnsel: " << msg << '\n'; }

  std::string header() const { return "# config_hash=" + hash_ + "\n"; }

  void write(const std::string& rel, const std::string& body) {
    const fs::path path = out_dir_ / rel;
    fs::create_directories(path.parent_path());
    const fs::path tmp = path.string() + ".tmp";
    {
      std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
      if (!out) data_error("cannot write " + path.string());
      out << body;
      if (!out) data_error("write failed for " + path.string());
    }
    fs::rename(tmp, path);
    artifacts_[rel] = hash_hex(body);
  }

  /// Primary artifact echoed on stdout with --stdout.
  void set_primary(const std::string& rel) { primary_ = rel; }

  bool exists(const std::string& rel) const { return fs::exists(out_dir_ / rel); }

  std::string read(const std::string& rel) const {
    std::ifstream in(out_dir_ / rel, std::ios::binary);
    if (!in) data_error("missing artifact " + (out_dir_ / rel).string() + " (run the producing command first)");
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
  }

  void finish(const std::string& command, const json& extra) {
    json manifest = extra;
    manifest["command"] = command;
    manifest["config_hash"] = hash_;
    manifest["tool_version"] = kToolVersion;
    json files = json::array();
    for (const auto& [rel, h] : artifacts_) files.push_back({{"path", rel}, {"hash", h}});
    manifest["artifacts"] = std::move(files);
    const std::string body = manifest.dump(2) + "\n";
    const fs::path path = out_dir_ / ("manifest_" + command + ".json");
    fs::create_directories(out_dir_);
    std::ofstream(path, std::ios::binary | std::ios::trunc) << body;
    if (options_.to_stdout && !primary_.empty()) out_ << read(primary_);
  }

 private:
  const RunConfig& config_;
  const RunOptions& options_;
  std::string hash_;
  fs::path out_dir_;
  std::ostream& log_;
  std::ostream& out_;
  std::map<std::string, std::string> artifacts_;
  std::string primary_;
};

struct Inputs {
  corpus::TokenizationPolicy policy;
  std::string stopwords_hash;
  std::unique_ptr<corpus::Corpus> corpus;
};

corpus::TokenizationPolicy base_policy(const RunConfig& c, std::string* stopwords_hash) {
  corpus::TokenizationPolicy policy;
  policy.lowercase = c.lowercase;
  if (c.stopwords == kBuiltinStopwords) {
    std::istringstream in{std::string(builtin_stopwords_text())};
    for (std::string line; std::getline(in, line);) {
      if (!line.empty() && line[0] != '#') policy.stopwords.insert(line);
    }
    if (stopwords_hash) *stopwords_hash = hash_hex(builtin_stopwords_text());
  } else if (!c.stopwords.empty()) {
    policy.stopwords = corpus::load_stopwords(c.stopwords);
    if (stopwords_hash) *stopwords_hash = hash_file(c.stopwords);
  }
  return policy;
}

Inputs load_inputs(Context& ctx) {
  Inputs in;
  in.policy = base_policy(ctx.config(), &in.stopwords_hash);
  const auto taxonomy = corpus::LabelTaxonomy::load(ctx.config().taxonomy);
  in.corpus = std::make_unique<corpus::Corpus>(corpus::load_corpus(ctx.config().corpus, taxonomy));
  ctx.info(fmt::format("loaded {} documents", in.corpus->size()));
  return in;
}

json input_hashes(const Inputs& in) {
  return {{"corpus_hash", in.corpus->content_hash()}, {"stopwords_hash", in.stopwords_hash}};
}

std::string ranking_path(const featsel::RankingTag& tag) { return "rankings/" + tag.str() + ".tsv"; }
std::string category_ranking_path(const std::string& code, const featsel::RankingTag& tag) {
  return "rankings/by_category/" + code + "/" + tag.str() + ".tsv";
}

std::string ranking_body(const Context& ctx, const featsel::TermRanking& r) {
  std::ostringstream ss;
  ss << ctx.header();
  featsel::write_ranking(ss, r);
  return ss.str();
}

featsel::TermRanking load_ranking(const Context& ctx, const std::string& rel) {
  std::istringstream in(ctx.read(rel));
  return featsel::read_ranking(in, rel);
}

featsel::TermRanking rankable_only(const featsel::TermRanking& r, const corpus::TokenizationPolicy& policy) {
  std::vector<featsel::ScoredTerm> kept;
  for (const auto& e : r.entries()) {
    if (featsel::is_rankable(e.term, policy)) kept.push_back(e);
  }
  return featsel::TermRanking(r.tag(), std::move(kept));
}

std::vector<featsel::Method> selection_methods(const RunConfig& c) {
  std::vector<featsel::Method> out;
  for (const auto& m : c.methods) out.push_back(featsel::parse_method(m));
  return out;
}

/// Canonical column order: attention first, then methods as configured, grouped by weighting.
std::vector<featsel::RankingTag> tag_order(const RunConfig& c) {
  std::vector<featsel::Method> methods{featsel::Method::Attention};
  for (auto m : selection_methods(c)) methods.push_back(m);
  std::vector<featsel::Weighting> ws{featsel::Weighting::None};
  for (const auto& w : c.weightings) ws.push_back(featsel::parse_weighting(w));
  std::vector<featsel::RankingTag> out;
  for (auto w : ws) {
    for (auto m : methods) out.push_back({m, w});
  }
  return out;
}

std::vector<attention::AttentionRecord> load_records(Context& ctx, const corpus::Corpus& corpus) {
  auto records = attention::load_dumps(ctx.config().dumps);
  std::set<std::string> seen;
  for (const auto& r : records) {
    if (!corpus.find(r.doc_id)) data_error("attention dump references unknown document '" + r.doc_id + "'");
    if (!seen.insert(r.doc_id).second) data_error("attention dump repeats document '" + r.doc_id + "'");
  }
  ctx.info(fmt::format("loaded {} attention records", records.size()));
  return records;
}

corpus::TokenizationPolicy attention_policy(const corpus::TokenizationPolicy& base) {
  // Stopwords and punctuation stay in the attended vocabulary; they are
  // filtered where rankings are compared.
  corpus::TokenizationPolicy p;
  p.lowercase = base.lowercase;
  return p;
}

// ---- commands -----------------------------------------------------------------

void cmd_ingest(Context& ctx) {
  auto in = load_inputs(ctx);
  const auto& corpus = *in.corpus;
  const corpus::Vocabulary vocab(corpus, in.policy);
  const auto folds = corpus::make_folds(corpus, ctx.config().folds, ctx.config().seed);

  std::ostringstream summary;
  summary << ctx.header() << "key\tvalue\n";
  summary << "documents\t" << corpus.size() << '\n';
  summary << "categories_level1\t" << corpus.taxonomy().codes_at_level(1).size() << '\n';
  summary << "categories_level2\t" << corpus.taxonomy().codes_at_level(2).size() << '\n';
  summary << "vocabulary\t" << vocab.terms().size() << '\n';
  summary << "stopwords\t" << in.policy.stopwords.size() << '\n';
  summary << "stopwords_hash\t" << in.stopwords_hash << '\n';
  summary << "corpus_hash\t" << corpus.content_hash() << '\n';
  summary << "folds\t" << folds.k() << '\n';
  ctx.write("ingest/corpus_summary.tsv", summary.str());

  std::ostringstream cats;
  cats << ctx.header() << "code\tlevel\tname\tdocuments\n";
  for (const auto& c : corpus.taxonomy().categories()) {
    cats << c.code << '\t' << (c.parent ? 2 : 1) << '\t' << c.name << '\t' << corpus.members(c.code).size() << '\n';
  }
  ctx.write("ingest/category_counts.tsv", cats.str());

  std::ostringstream voc;
  voc << ctx.header() << "term\tdf\ttf\n";
  for (const auto& t : vocab.terms()) voc << t << '\t' << vocab.presence(t).size() << '\t' << vocab.term_frequency(t) << '\n';
  ctx.write("ingest/vocabulary.tsv", voc.str());

  std::ostringstream fo;
  fo << ctx.header() << "doc_id\tfold\n";
  for (std::size_t i = 0; i < corpus.size(); ++i) fo << corpus.document(i).id << '\t' << folds.fold_of(i) << '\n';
  ctx.write("ingest/folds.tsv", fo.str());

  ctx.set_primary("ingest/corpus_summary.tsv");
  ctx.finish("ingest", input_hashes(in));
}

void cmd_attend(Context& ctx) {
  auto in = load_inputs(ctx);
  const auto& corpus = *in.corpus;
  const auto records = load_records(ctx, corpus);
  if (records.empty()) data_error("attention dump contains no records");
  const auto policy = attention_policy(in.policy);
  const int level = ctx.config().level;

  std::vector<attention::DocumentAttention> docs(records.size());
  parallel_for(records.size(), ctx.jobs(), [&](std::size_t i) { docs[i] = attention::analyse_record(records[i], policy); });

  attention::AttentionAggregator all;
  std::map<std::string, attention::AttentionAggregator> per_category;
  for (const auto& d : docs) {
    all.add(d);
    for (const auto& code : corpus.labels(*corpus.find(d.doc_id), level)) per_category[code].add(d);
  }
  const auto av = all.finish();

  std::ostringstream vocab;
  vocab << ctx.header() << "term\tmean_attention\toccurrences\tselected_docs\tattended\n";
  for (const auto& [term, s] : av.terms) {
    vocab << term << '\t' << format_score(s.mean()) << '\t' << s.occurrences << '\t' << s.selected_docs << '\t'
          << (av.attended.contains(term) ? 1 : 0) << '\n';
  }
  ctx.write("attend/attended_vocabulary.tsv", vocab.str());

  std::ostringstream stats;
  stats << ctx.header() << "key\tvalue\n";
  stats << "documents\t" << av.documents << '\n';
  stats << "words\t" << av.terms.size() << '\n';
  stats << "attended_words\t" << av.attended.size() << '\n';
  stats << "word_fraction\t" << format_score(av.word_fraction()) << '\n';
  stats << "subword_tokens\t" << av.distinct_subwords << '\n';
  stats << "attended_subword_tokens\t" << av.distinct_attended_subwords << '\n';
  stats << "subword_fraction\t" << format_score(av.subword_fraction()) << '\n';
  ctx.write("attend/attention_stats.tsv", stats.str());

  ctx.write("attend/selection_frequency.tsv", ranking_body(ctx, av.selection_frequency_ranking()));
  const featsel::RankingTag tag{featsel::Method::Attention, featsel::Weighting::None};
  ctx.write(ranking_path(tag), ranking_body(ctx, av.ranking()));
  for (const auto& [code, agg] : per_category) {
    ctx.write(category_ranking_path(code, tag), ranking_body(ctx, agg.finish().ranking()));
  }
  ctx.info(fmt::format("{} attended words out of {}", av.attended.size(), av.terms.size()));
  ctx.set_primary("attend/attended_vocabulary.tsv");
  ctx.finish("attend", input_hashes(in));
}

void cmd_select(Context& ctx) {
  auto in = load_inputs(ctx);
  const auto& corpus = *in.corpus;
  const auto& cfg = ctx.config();
  const corpus::Vocabulary vocab(corpus, in.policy);
  const featsel::RankOptions opts{cfg.level, cfg.min_df, ctx.jobs()};
  std::vector<featsel::Weighting> schemes;
  for (const auto& w : cfg.weightings) schemes.push_back(featsel::parse_weighting(w));

  auto emit = [&](const featsel::TermRanking& base, const std::function<std::string(const featsel::RankingTag&)>& path) {
    ctx.write(path(base.tag()), ranking_body(ctx, base));
    for (auto w : schemes) {
      const auto weighted = featsel::weight_ranking(base, vocab, w);
      ctx.write(path(weighted.tag()), ranking_body(ctx, weighted));
    }
  };
  auto global_path = [](const featsel::RankingTag& t) { return ranking_path(t); };

  const featsel::RankingTag attn{featsel::Method::Attention, featsel::Weighting::None};
  if (ctx.exists(ranking_path(attn))) {
    for (auto w : schemes) {
      const auto weighted = featsel::weight_ranking(load_ranking(ctx, ranking_path(attn)), vocab, w);
      ctx.write(ranking_path(weighted.tag()), ranking_body(ctx, weighted));
    }
  }
  std::ostringstream index;
  index << ctx.header() << "method\tscope\tterms\n";
  for (auto m : selection_methods(cfg)) {
    const auto r = featsel::rank_terms(m, corpus, vocab, in.policy, opts);
    index << featsel::to_string(m) << "\tall\t" << r.size() << '\n';
    emit(r, global_path);
  }
  const auto codes = corpus.taxonomy().codes_at_level(cfg.level);
  for (const auto& code : codes) {
    auto cat_path = [&](const featsel::RankingTag& t) { return category_ranking_path(code, t); };
    if (ctx.exists(category_ranking_path(code, attn))) {
      const auto base = load_ranking(ctx, category_ranking_path(code, attn));
      for (auto w : schemes) {
        const auto weighted = featsel::weight_ranking(base, vocab, w);
        ctx.write(cat_path(weighted.tag()), ranking_body(ctx, weighted));
      }
    }
    for (auto m : selection_methods(cfg)) {
      const auto r = featsel::rank_terms_for_category(m, code, corpus, vocab, in.policy, opts);
      index << featsel::to_string(m) << '\t' << code << '\t' << r.size() << '\n';
      emit(r, cat_path);
    }
  }
  ctx.write("select/rankings_index.tsv", index.str());
  ctx.set_primary("select/rankings_index.tsv");
  ctx.finish("select", input_hashes(in));
}

void cmd_compare(Context& ctx) {
  const auto& cfg = ctx.config();
  const auto policy = base_policy(cfg, nullptr);
  std::vector<featsel::TermRanking> rankings;
  const featsel::RankingTag attn{featsel::Method::Attention, featsel::Weighting::None};
  const bool have_attention = ctx.exists(ranking_path(attn));
  if (have_attention) rankings.push_back(rankable_only(load_ranking(ctx, ranking_path(attn)), policy));
  for (auto m : selection_methods(cfg)) rankings.push_back(load_ranking(ctx, ranking_path({m, featsel::Weighting::None})));

  std::size_t k = cfg.overlap_k;
  if (k == 0) k = have_attention ? rankings.front().size() : cfg.top_n;
  if (k == 0) data_error("attended vocabulary is empty after stopword filtering; set overlap_k");

  std::vector<std::pair<std::size_t, std::size_t>> pairs;
  if (have_attention) {
    for (std::size_t j = 1; j < rankings.size(); ++j) pairs.emplace_back(0, j);
  } else {
    for (std::size_t i = 0; i < rankings.size(); ++i) {
      for (std::size_t j = i + 1; j < rankings.size(); ++j) pairs.emplace_back(i, j);
    }
  }
  struct Row {
    double overlap;
    std::vector<rankcmp::RboResult> rbo;
  };
  std::vector<Row> rows(pairs.size());
  parallel_for(pairs.size(), ctx.jobs(), [&](std::size_t i) {
    const auto& a = rankings[pairs[i].first];
    const auto& b = rankings[pairs[i].second];
    if (a.empty() || b.empty()) data_error("cannot compare empty ranking " + (a.empty() ? a : b).tag().str());
    rows[i].overlap = rankcmp::overlap_at_k(a, b, k);
    for (double p : cfg.p_grid) rows[i].rbo.push_back(rankcmp::rbo(a, b, {p, std::nullopt}));
  });

  std::ostringstream tsv, csv;
  tsv << ctx.header() << "method_a\tmethod_b\tk\toverlap\tp\trbo_min\tresidual\trbo_ext\n";
  csv << ctx.header() << "method_a,method_b,p,rbo_ext\n";
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    const auto a = rankings[pairs[i].first].tag().str();
    const auto b = rankings[pairs[i].second].tag().str();
    for (std::size_t pi = 0; pi < cfg.p_grid.size(); ++pi) {
      const auto& r = rows[i].rbo[pi];
      tsv << a << '\t' << b << '\t' << k << '\t' << format_score(rows[i].overlap) << '\t'
          << format_score(cfg.p_grid[pi]) << '\t' << format_score(r.min) << '\t' << format_score(r.residual) << '\t'
          << format_score(r.ext) << '\n';
      csv << a << ',' << b << ',' << format_score(cfg.p_grid[pi]) << ',' << format_score(r.ext) << '\n';
    }
  }
  ctx.write("compare/comparison.tsv", tsv.str());
  ctx.write("compare/rbo_series.csv", csv.str());

  std::ostringstream weights;
  weights << ctx.header() << "p\tdepth\tprefix_weight\n";
  for (double p : cfg.p_grid) {
    const auto depth = static_cast<std::size_t>(std::llround(1.0 / (1.0 - p)));
    weights << format_score(p) << '\t' << depth << '\t' << format_score(rankcmp::rbo_prefix_weight(depth, p)) << '\n';
  }
  ctx.write("compare/prefix_weights.tsv", weights.str());
  ctx.set_primary("compare/comparison.tsv");
  ctx.finish("compare", json::object());
}

std::shared_ptr<domainrel::KnowledgeGraph> open_graph(Context& ctx) {
  const auto& kg = ctx.config().kg;
  if (kg.backend == "dump") {
    auto g = std::make_shared<domainrel::InMemoryGraph>(domainrel::InMemoryGraph::load_edge_dump(kg.edges));
    ctx.info(fmt::format("loaded {} knowledge-graph edges", g->edge_count()));
    return g;
  }
  domainrel::LiveOptions live;
  live.requests_per_second = kg.requests_per_second;
  live.max_retries = kg.max_retries;
  auto client = std::make_shared<domainrel::ConceptNetClient>(
      domainrel::make_http_fetcher(kg.endpoint, std::chrono::milliseconds(kg.timeout_ms)), live);
  return std::make_shared<domainrel::CachedGraph>(client, kg.cache, "live");
}

void cmd_domains(Context& ctx) {
  const auto& cfg = ctx.config();
  const auto policy = base_policy(cfg, nullptr);
  const auto taxonomy = corpus::LabelTaxonomy::load(cfg.taxonomy);
  const auto mapping = domainrel::load_mapping(cfg.mapping);
  if (mapping.empty()) data_error("concept mapping " + cfg.mapping + " is empty");
  for (const auto& [code, _] : mapping) {
    if (!taxonomy.contains(code)) data_error("mapping names unknown category '" + code + "'");
  }
  auto kg = open_graph(ctx);

  domainrel::CategoryRankings per;
  for (const auto& code : taxonomy.codes_at_level(cfg.level)) {
    if (!mapping.contains(code)) {
      ctx.info("category " + code + " has no concept mapping; skipped");
      continue;
    }
    auto& list = per[code];
    for (const auto& tag : tag_order(cfg)) {
      const auto rel = category_ranking_path(code, tag);
      if (ctx.exists(rel)) list.push_back(load_ranking(ctx, rel));
    }
    if (list.empty()) data_error("no rankings for category " + code + " (run attend/select first)");
  }
  domainrel::RelevanceOptions opts;
  opts.n = cfg.top_n;
  opts.prefilter = &policy;
  const auto report = domainrel::relevance_report(per, mapping, *kg, opts);

  std::ostringstream table, longform;
  table << ctx.header();
  domainrel::write_report_table(table, report);
  longform << ctx.header() << "category\tmethod\tn\tcount\n";
  for (const auto& r : report.rows) longform << r.category << '\t' << r.method << '\t' << report.n << '\t' << r.count << '\n';
  ctx.write("domains/domain_relevance.tsv", table.str());
  ctx.write("domains/domain_relevance_long.tsv", longform.str());
  ctx.set_primary("domains/domain_relevance.tsv");
  ctx.finish("domains", json::object());
}

corpus::FoldAssignment fold_assignment(Context& ctx, const corpus::Corpus& corpus) {
  const auto& cfg = ctx.config();
  if (!ctx.exists("ingest/folds.tsv")) return corpus::make_folds(corpus, cfg.folds, cfg.seed);
  std::istringstream in(ctx.read("ingest/folds.tsv"));
  std::vector<int> fold_of(corpus.size(), -1);
  std::string line;
  bool header = false;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    if (!header) {
      header = true;
      continue;
    }
    const auto tab = line.find('\t');
    const auto idx = corpus.find(line.substr(0, tab));
    if (tab == std::string::npos || !idx) data_error("ingest/folds.tsv does not match the corpus");
    fold_of[*idx] = std::stoi(line.substr(tab + 1));
  }
  if (std::find(fold_of.begin(), fold_of.end(), -1) != fold_of.end()) data_error("ingest/folds.tsv does not cover the corpus");
  return corpus::FoldAssignment(cfg.folds, std::move(fold_of));
}

void cmd_evaluate(Context& ctx) {
  auto in = load_inputs(ctx);
  const auto& corpus = *in.corpus;
  const auto& cfg = ctx.config();
  const auto folds = fold_assignment(ctx, corpus);
  const featsel::RankOptions rank_opts{cfg.level, cfg.min_df, 1};
  const auto policy = in.policy;

  std::vector<classify::FeatureSource> sources;
  // Attention analyses are per document, so each training split only re-reduces them.
  auto analyses = std::make_shared<std::map<std::size_t, attention::DocumentAttention>>();
  if (!cfg.dumps.empty()) {
    const auto records = load_records(ctx, corpus);
    std::vector<attention::DocumentAttention> docs(records.size());
    const auto apol = attention_policy(policy);
    parallel_for(records.size(), ctx.jobs(), [&](std::size_t i) { docs[i] = attention::analyse_record(records[i], apol); });
    for (auto& d : docs) (*analyses)[*corpus.find(d.doc_id)] = std::move(d);
    sources.push_back({"attention", [analyses, policy](const corpus::Corpus&, const corpus::Vocabulary&,
                                                       std::span<const std::size_t> train) {
                         attention::AttentionAggregator agg;
                         for (auto i : train) {
                           if (auto it = analyses->find(i); it != analyses->end()) agg.add(it->second);
                         }
                         if (agg.empty()) data_error("no attention records in a training split");
                         return rankable_only(agg.finish().ranking(), policy);
                       }});
  }
  for (auto m : selection_methods(cfg)) {
    sources.push_back({std::string(featsel::to_string(m)),
                       [m, rank_opts, policy](const corpus::Corpus& train, const corpus::Vocabulary& vocab,
                                              std::span<const std::size_t>) {
                         return featsel::rank_terms(m, train, vocab, policy, rank_opts);
                       }});
  }

  classify::CvOptions cv;
  cv.level = cfg.level;
  cv.k_grid = cfg.k_grid;
  cv.weightings.clear();
  for (const auto& f : cfg.features) cv.weightings.push_back(classify::parse_feature_weighting(f));
  cv.models.clear();
  for (const auto& m : cfg.models) cv.models.push_back(classify::parse_model_kind(m));
  cv.nb_alpha = cfg.nb_alpha;
  cv.logreg = cfg.logreg;
  cv.policy = policy;
  cv.jobs = ctx.jobs();
  const auto report = classify::cross_validate(corpus, folds, sources, cv);

  std::ostringstream eval, series;
  eval << ctx.header() << "feature_method\tk\tweighting\tmodel\tfold\tprecision\trecall\tf1\tmacro_f1\n";
  series << ctx.header() << "feature_method,weighting,model,k,f1\n";
  for (const auto& r : report.rows) {
    eval << r.feature_method << '\t' << r.k << '\t' << classify::to_string(r.weighting) << '\t'
         << classify::to_string(r.model) << '\t' << (r.fold < 0 ? std::string("all") : std::to_string(r.fold)) << '\t'
         << format_score(r.metrics.precision) << '\t' << format_score(r.metrics.recall) << '\t'
         << format_score(r.metrics.f1) << '\t' << format_score(r.metrics.macro_f1) << '\n';
    if (r.fold < 0) {
      series << r.feature_method << ',' << classify::to_string(r.weighting) << ',' << classify::to_string(r.model)
             << ',' << r.k << ',' << format_score(r.metrics.f1) << '\n';
    }
  }
  ctx.write("evaluate/evaluation.tsv", eval.str());
  ctx.write("evaluate/f1_series.csv", series.str());

  std::ostringstream stab, pairs;
  stab << ctx.header() << "method\tk\tfolds\tmean_jaccard\n";
  pairs << ctx.header() << "method\tk\tfold_a\tfold_b\tjaccard\n";
  for (const auto& [key, sets] : report.selections) {
    const auto s = rankcmp::stability(sets, key.first);
    stab << key.first << '\t' << key.second << '\t' << sets.size() << '\t' << format_score(s.mean_jaccard) << '\n';
    for (std::size_t i = 0; i < sets.size(); ++i) {
      for (std::size_t j = i + 1; j < sets.size(); ++j) {
        pairs << key.first << '\t' << key.second << '\t' << i << '\t' << j << '\t' << format_score(s.pairwise[i][j])
              << '\n';
      }
    }
  }
  ctx.write("evaluate/stability.tsv", stab.str());
  ctx.write("evaluate/stability_pairs.tsv", pairs.str());
  ctx.set_primary("evaluate/evaluation.tsv");
  ctx.finish("evaluate", input_hashes(in));
}

std::string tsv_to_markdown(const std::string& body, const std::function<bool(const std::vector<std::string>&)>& keep) {
  std::istringstream in(body);
  std::ostringstream out;
  std::string line;
  bool header = true;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    std::vector<std::string> cells;
    std::istringstream fields(line);
    for (std::string c; std::getline(fields, c, '\t');) cells.push_back(c);
    if (!header && keep && !keep(cells)) continue;
    out << '|';
    for (const auto& c : cells) out << ' ' << c << " |";
    out << '\n';
    if (header) {
      out << '|';
      for (std::size_t i = 0; i < cells.size(); ++i) out << "---|";
      out << '\n';
      header = false;
    }
  }
  return out.str();
}

void cmd_report(Context& ctx) {
  struct Section {
    const char* title;
    const char* artifact;
    std::function<bool(const std::vector<std::string>&)> keep;
  };
  const std::vector<Section> sections{
      {"Corpus", "ingest/corpus_summary.tsv", nullptr},
      {"Attention", "attend/attention_stats.tsv", nullptr},
      {"Ranking comparison", "compare/comparison.tsv", nullptr},
      {"RBO prefix weights", "compare/prefix_weights.tsv", nullptr},
      {"Domain relevance", "domains/domain_relevance.tsv", nullptr},
      {"Classification (pooled over folds)", "evaluate/evaluation.tsv",
       [](const std::vector<std::string>& row) { return row.size() > 4 && row[4] == "all"; }},
      {"Feature stability", "evaluate/stability.tsv", nullptr},
  };
  std::ostringstream md;
  md << "# attnsel report\n\n";
  md << "config_hash: `" << ctx.config_hash() << "`\n\n";
  md << "## Stages\n\n";
  for (const auto& c : commands()) {
    if (c == "report") continue;
    const std::string manifest = "manifest_" + c + ".json";
    if (!ctx.exists(manifest)) {
      md << "- " << c << ": not run\n";
      continue;
    }
    const auto j = json::parse(ctx.read(manifest));
    const bool stale = j.value("config_hash", "") != ctx.config_hash();
    md << "- " << c << ": " << j["artifacts"].size() << " artifacts" << (stale ? " (STALE: different config)" : "")
       << '\n';
  }
  md << '\n';
  std::size_t included = 0;
  for (const auto& s : sections) {
    if (!ctx.exists(s.artifact)) continue;
    ++included;
    md << "## " << s.title << "\n\nSource: `" << s.artifact << "`\n\n" << tsv_to_markdown(ctx.read(s.artifact), s.keep)
       << '\n';
  }
  if (included == 0) data_error("nothing to report: run the other commands first");
  ctx.write("report/summary.md", md.str());
  ctx.set_primary("report/summary.md");
  ctx.finish("report", json::object());
}

}  // namespace

void run(const std::string& command, const RunConfig& config, const RunOptions& options) {
  config.validate(command);
  Context ctx(config, options);
  ctx.info(fmt::format("{} (config {}, jobs {})", command, ctx.config_hash(), ctx.jobs()));
  if (command == "ingest") cmd_ingest(ctx);
  else if (command == "attend") cmd_attend(ctx);
  else if (command == "select") cmd_select(ctx);
  else if (command == "compare") cmd_compare(ctx);
  else if (command == "domains") cmd_domains(ctx);
  else if (command == "evaluate") cmd_evaluate(ctx);
  else cmd_report(ctx);
}

namespace {

int exit_code(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::Config: return 2;
    case ErrorKind::Data: return 3;
    case ErrorKind::External: return 4;
  }
  return 1;
}

const char* kind_name(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::Config: return "config";
    case ErrorKind::Data: return "data";
    case ErrorKind::External: return "external";
  }
  return "internal";
}

void report_error(const char* kind, int code, std::string message) {
  std::replace(message.begin(), message.end(), '\n', ' ');
  std::cerr << "attnsel: error kind=" << kind << " exit=" << code << " message=" << json(message).dump() << '\n';
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Attention vs. feature-selection corpus analysis", "attnsel"};
  std::string command;
  std::string config_path;
  unsigned jobs = 1;
  bool to_stdout = false;
  std::optional<std::string> output;
  std::optional<std::uint64_t> seed;
  std::optional<int> folds;
  std::optional<int> level;
  app.add_option("command", command, "ingest | attend | select | compare | domains | evaluate | report")
      ->required()
      ->check(CLI::IsMember(commands()));
  app.add_option("--config", config_path, "JSON run configuration")->required();
  app.add_option("--jobs", jobs, "worker threads (1 = sequential)")->check(CLI::PositiveNumber);
  app.add_flag("--stdout", to_stdout, "also write the command's main artifact to standard output");
  app.add_option("--output", output, "override config 'output'");
  app.add_option("--seed", seed, "override config 'seed'");
  app.add_option("--folds", folds, "override config 'folds'");
  app.add_option("--level", level, "override config 'level'");
  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    report_error("config", 2, e.what());
    return 2;
  }
  try {
    RunConfig cfg = RunConfig::load(config_path);
    // Flags take precedence over the config file, which takes precedence over defaults.
    if (output) cfg.output = fs::absolute(*output).lexically_normal().string();
    if (seed) cfg.seed = cfg.logreg.seed = *seed;
    if (folds) cfg.folds = *folds;
    if (level) cfg.level = *level;
    RunOptions opts;
    opts.jobs = jobs;
    opts.to_stdout = to_stdout;
    run(command, cfg, opts);
  } catch (const Error& e) {
    report_error(kind_name(e.kind()), exit_code(e.kind()), e.what());
    return exit_code(e.kind());
  } catch (const fs::filesystem_error& e) {
    report_error("data", 3, e.what());
    return 3;
  } catch (const std::exception& e) {
    report_error("internal", 1, e.what());
    return 1;
  }
  return 0;
}

}  // namespace attnsel::pipeline
