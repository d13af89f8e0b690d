#include "fixtures.hpp"

#include "attnsel/common.hpp"

#include <fmt/format.h>

#include <unistd.h>

#include <fstream>
#include <limits>
#include <json.hpp>
#include <sstream>

namespace fixtures {

namespace fs = std::filesystem;
using attnsel::Matrix;
using attnsel::attention::AttentionRecord;
using attnsel::corpus::Category;
using attnsel::corpus::Document;
using attnsel::corpus::LabelTaxonomy;
using nlohmann::json;

std::uint64_t below(std::mt19937_64& rng, std::uint64_t n) {
  const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() - std::numeric_limits<std::uint64_t>::max() % n;
  std::uint64_t x;
  do x = rng();
  while (x >= limit);
  return x % n;
}

double unit(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

Planted planted_corpus(const PlantedShape& shape) {
  Planted out;
  std::vector<Category> cats;
  for (std::size_t c = 0; c < shape.categories; ++c) {
    const auto code = fmt::format("{:02}", c + 1);
    out.level1.push_back(code);
    cats.push_back({code, fmt::format("Field {}", c + 1), std::nullopt});
    for (int child = 1; child <= 2; ++child) {
      cats.push_back({fmt::format("{}{:02}", code, child), fmt::format("Field {}.{}", c + 1, child), code});
    }
    std::vector<std::string> m;
    for (std::size_t j = 0; j < shape.markers; ++j) m.push_back(fmt::format("c{}m{}", c, j));
    out.markers.push_back(std::move(m));
  }
  out.taxonomy = LabelTaxonomy(cats);

  std::mt19937_64 rng(shape.seed);
  const char* glue[] = {"the", "of", "and", "in", "a"};
  auto filler = [&] { return fmt::format("w{:03}", below(rng, shape.fillers)); };
  for (std::size_t i = 0; i < shape.documents; ++i) {
    const std::size_t c = i % shape.categories;
    const auto& markers = out.markers[c];
    std::vector<std::string> words;
    auto marker = [&] { return markers[below(rng, markers.size())]; };

    std::string title = filler() + " " + marker() + " " + filler();
    for (int k = 0; k < 14; ++k) {
      words.push_back(filler());
      if (below(rng, 3) == 0) words.push_back(glue[below(rng, 5)]);
    }
    words.push_back(marker());
    words.push_back(marker());
    for (std::size_t l = 0; l < shape.lean; ++l) {
      for (std::size_t other = 0; other < shape.categories; ++other) {
        const double rate = other == c ? 0.3 : 0.03;
        if (unit(rng) < rate) words.push_back(fmt::format("c{}l{}", other, l));
      }
    }
    // Shuffle so markers are not always at the end.
    for (std::size_t k = words.size(); k > 1; --k) std::swap(words[k - 1], words[below(rng, k)]);
    std::string abstract;
    for (std::size_t k = 0; k < words.size(); ++k) {
      abstract += (k ? (k % 7 == 0 ? ", " : " ") : "") + words[k];
    }
    abstract += ".";
    const auto& code = out.level1[c];
    // Half the documents are labelled at the second level only.
    std::vector<std::string> labels{i % 2 ? code : fmt::format("{}{:02}", code, 1 + (i / 2) % 2)};
    out.documents.push_back({fmt::format("doc{:04}", i), title, abstract, labels});
  }
  return out;
}

AttentionRecord planted_record(const Document& doc, std::uint64_t seed) {
  attnsel::corpus::TokenizationPolicy keep;
  keep.keep_punctuation = true;
  const auto words = attnsel::corpus::tokenize(doc.text(), keep);

  AttentionRecord r;
  r.doc_id = doc.id;
  r.layer = 11;
  std::vector<double> pull;
  auto push = [&](std::string tok, bool special, std::optional<int> wid, double w) {
    r.tokens.push_back(std::move(tok));
    r.special.push_back(special);
    r.word_ids.push_back(wid);
    pull.push_back(w);
  };
  push("[CLS]", true, std::nullopt, 2.0);
  for (std::size_t k = 0; k < words.size(); ++k) {
    const auto& w = words[k];
    double strength = 1.0;
    if (w.size() == 4 && w[0] == 'c' && w[2] == 'm') strength = 6.0;
    else if (w.size() == 4 && w[0] == 'c' && w[2] == 'l') strength = 2.5;
    const int id = static_cast<int>(k);
    if (w.size() >= 4 && k % 2 == 0) {
      push(w.substr(0, 2), false, id, strength);
      push("##" + w.substr(2), false, id, strength);
    } else {
      push(w, false, id, strength);
    }
  }
  push("[SEP]", true, std::nullopt, 3.0);

  attnsel::Fnv1a h;
  h.update(doc.id);
  std::mt19937_64 rng(seed ^ h.digest());
  const std::size_t n = r.tokens.size();
  Matrix m(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    double sum = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      m(i, j) = pull[j] * (0.9 + 0.2 * unit(rng));
      sum += m(i, j);
    }
    for (std::size_t j = 0; j < n; ++j) m(i, j) /= sum;
  }
  r.heads.push_back(std::move(m));
  r.pre_averaged = true;
  return r;
}

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream(path, std::ios::binary | std::ios::trunc) << text;
}

std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_taxonomy(const fs::path& path, const LabelTaxonomy& taxonomy) {
  std::string out;
  for (const auto& c : taxonomy.categories()) {
    json j{{"code", c.code}, {"name", c.name}, {"parent", c.parent ? json(*c.parent) : json(nullptr)}};
    out += j.dump() + "\n";
  }
  write_text(path, out);
}

void write_corpus(const fs::path& path, const std::vector<Document>& docs) {
  std::string out;
  for (const auto& d : docs) {
    out += json{{"id", d.id}, {"title", d.title}, {"abstract", d.abstract}, {"categories", d.categories}}.dump() + "\n";
  }
  write_text(path, out);
}

void write_dump(const fs::path& path, const std::vector<AttentionRecord>& records) {
  std::string out;
  for (const auto& r : records) out += attnsel::attention::serialize_record(r) + "\n";
  write_text(path, out);
}

fs::path write_planted_project(const fs::path& dir, const PlantedShape& shape) {
  const auto planted = planted_corpus(shape);
  write_taxonomy(dir / "taxonomy.jsonl", planted.taxonomy);
  write_corpus(dir / "corpus.jsonl", planted.documents);
  std::vector<AttentionRecord> records;
  for (const auto& d : planted.documents) records.push_back(planted_record(d, shape.seed));
  write_dump(dir / "dumps" / "part-000.jsonl", records);
  // Every marker of the first category belongs to its domain; one lean term
  // reaches it through a form-of root.
  std::string edges;
  for (const auto& m : planted.markers[0]) edges += "HasContext\t/c/en/" + m + "\t/c/en/computer_science\n";
  edges += "FormOf\t/c/en/c0l0\t/c/en/c0m0\n";
  edges += "HasContext\t/c/en/c1m0\t/c/en/electronics\n";
  edges += "IsA\t/c/en/electronics\t/c/en/physics\n";
  write_text(dir / "edges.tsv", edges);
  write_text(dir / "mapping.csv", "01,/c/en/computer_science\n02,/c/en/physics\n");
  const json config{
      {"corpus", "corpus.jsonl"},
      {"taxonomy", "taxonomy.jsonl"},
      {"dumps", "dumps"},
      {"mapping", "mapping.csv"},
      {"output", "out"},
      {"folds", 5},
      {"seed", 42},
      {"k_grid", {25, 50}},
      {"top_n", 50},
      {"kg", {{"backend", "dump"}, {"edges", "edges.tsv"}}},
  };
  write_text(dir / "config.json", config.dump(2) + "\n");
  return dir / "config.json";
}

attnsel::domainrel::InMemoryGraph networking_graph() {
  using attnsel::domainrel::Relation;
  attnsel::domainrel::InMemoryGraph g;
  g.add_edge(Relation::FormOf, "/c/en/networking", "/c/en/network");
  g.add_edge(Relation::HasContext, "/c/en/network", "/c/en/computer_science");
  g.add_edge(Relation::HasContext, "/c/en/network", "/c/en/electronics");
  g.add_edge(Relation::IsA, "/c/en/electronics", "/c/en/physics");
  g.add_edge(Relation::HasContext, "/c/en/protein", "/c/en/biology");
  g.add_edge(Relation::IsA, "/c/en/biology", "/c/en/science");
  g.add_edge(Relation::FormOf, "/c/en/proteins", "/c/en/protein");
  g.add_node("/c/en/the");
  g.add_node("/c/en/algorithm");
  g.add_edge(Relation::HasContext, "/c/en/algorithm", "/c/en/computer_science");
  g.add_edge(Relation::HasContext, "/c/en/electron", "/c/en/physics");
  return g;
}

TempDir::TempDir(const std::string& tag) {
  static std::uint64_t counter = 0;
  path_ = fs::temp_directory_path() / fmt::format("attnsel-{}-{}-{}", tag, ::getpid(), counter++);
  fs::remove_all(path_);
  fs::create_directories(path_);
}

TempDir::~TempDir() {
  std::error_code ec;
  fs::remove_all(path_, ec);
}

}  // namespace fixtures
