#include "attnsel/corpus.hpp"

#include <json.hpp>

#include <algorithm>
#include <fstream>
#include <limits>
#include <random>

#include "attnsel/common.hpp"

namespace attnsel::corpus {

using nlohmann::json;

namespace {

std::string line_error(const std::string& path, std::size_t line, const std::string& what) {
  return path + ":" + std::to_string(line) + ": " + what;
}

std::string require_string(const json& rec, const char* field) {
  auto it = rec.find(field);
  if (it == rec.end() || !it->is_string()) {
    throw std::invalid_argument(std::string("missing or non-string field '") + field + "'");
  }
  return it->get<std::string>();
}

// ---- UTF-8 helpers -------------------------------------------------------

// Decodes one code point starting at `i`; advances `i`. Invalid bytes decode to U+FFFD.
char32_t next_code_point(std::string_view s, std::size_t& i) {
  const auto b0 = static_cast<unsigned char>(s[i]);
  auto cont = [&](std::size_t k) -> int {
    if (i + k >= s.size()) return -1;
    const auto b = static_cast<unsigned char>(s[i + k]);
    return (b & 0xC0) == 0x80 ? (b & 0x3F) : -1;
  };
  if (b0 < 0x80) {
    ++i;
    return b0;
  }
  int len = 0;
  char32_t cp = 0;
  if ((b0 & 0xE0) == 0xC0) {
    len = 2;
    cp = b0 & 0x1F;
  } else if ((b0 & 0xF0) == 0xE0) {
    len = 3;
    cp = b0 & 0x0F;
  } else if ((b0 & 0xF8) == 0xF0) {
    len = 4;
    cp = b0 & 0x07;
  } else {
    ++i;
    return 0xFFFD;
  }
  for (int k = 1; k < len; ++k) {
    const int c = cont(k);
    if (c < 0) {
      ++i;
      return 0xFFFD;
    }
    cp = (cp << 6) | static_cast<char32_t>(c);
  }
  i += static_cast<std::size_t>(len);
  return cp;
}

void append_utf8(std::string& out, char32_t cp) {
  if (cp < 0x80) {
    out.push_back(static_cast<char>(cp));
  } else if (cp < 0x800) {
    out.push_back(static_cast<char>(0xC0 | (cp >> 6)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  } else if (cp < 0x10000) {
    out.push_back(static_cast<char>(0xE0 | (cp >> 12)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  } else {
    out.push_back(static_cast<char>(0xF0 | (cp >> 18)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 12) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  }
}

bool is_space(char32_t cp) {
  return cp == ' ' || (cp >= 0x09 && cp <= 0x0D) || cp == 0x85 || cp == 0xA0 || cp == 0x1680 ||
         (cp >= 0x2000 && cp <= 0x200B) || cp == 0x2028 || cp == 0x2029 || cp == 0x202F ||
         cp == 0x205F || cp == 0x3000 || cp == 0xFEFF;
}

// Letters and digits. Outside ASCII, everything is a word character except the
// punctuation, symbol and control blocks listed here.
bool is_alnum(char32_t cp) {
  if (cp < 0x80) {
    return (cp >= '0' && cp <= '9') || (cp >= 'a' && cp <= 'z') || (cp >= 'A' && cp <= 'Z');
  }
  if (cp <= 0xBF) return cp == 0xAA || cp == 0xB2 || cp == 0xB3 || cp == 0xB5 || cp == 0xB9 || cp == 0xBA;
  if (cp == 0xD7 || cp == 0xF7) return false;
  if (cp >= 0x2000 && cp <= 0x206F) return false;  // general punctuation
  if (cp >= 0x20A0 && cp <= 0x20CF) return false;  // currency
  if (cp >= 0x2190 && cp <= 0x2BFF) return false;  // arrows, math operators, symbols
  if (cp >= 0x3000 && cp <= 0x303F) return false;  // CJK punctuation
  if (cp >= 0xFE30 && cp <= 0xFE4F) return false;
  if ((cp >= 0xFF00 && cp <= 0xFF0F) || (cp >= 0xFF1A && cp <= 0xFF20) || (cp >= 0xFF3B && cp <= 0xFF40) ||
      (cp >= 0xFF5B && cp <= 0xFF65)) {
    return false;
  }
  return cp != 0xFFFD;
}

char32_t lower_code_point(char32_t cp) {
  if (cp >= 'A' && cp <= 'Z') return cp + 0x20;
  if (cp < 0xC0) return cp;
  if (cp <= 0xDE) return cp == 0xD7 ? cp : cp + 0x20;
  if (cp >= 0x100 && cp <= 0x17F) {
    const bool odd_upper = (cp >= 0x139 && cp <= 0x148) || (cp >= 0x179 && cp <= 0x17E);
    if (cp == 0x130 || cp == 0x131 || cp == 0x138 || cp == 0x149 || cp == 0x17F) return cp;
    if (cp == 0x178) return 0xFF;
    if (odd_upper) return (cp % 2 == 1) ? cp + 1 : cp;
    return (cp % 2 == 0) ? cp + 1 : cp;
  }
  if (cp >= 0x391 && cp <= 0x3A9 && cp != 0x3A2) return cp + 0x20;
  if (cp >= 0x410 && cp <= 0x42F) return cp + 0x20;
  if (cp >= 0x400 && cp <= 0x40F) return cp + 0x50;
  return cp;
}

}  // namespace

// ---- taxonomy ------------------------------------------------------------

LabelTaxonomy::LabelTaxonomy(std::vector<Category> categories) : categories_(std::move(categories)) {
  for (std::size_t i = 0; i < categories_.size(); ++i) {
    const auto& c = categories_[i];
    if (c.code.empty()) data_error("taxonomy: empty category code");
    if (!index_.emplace(c.code, i).second) data_error("taxonomy: duplicate code '" + c.code + "'");
  }
  for (const auto& c : categories_) {
    if (!c.parent) continue;
    auto it = index_.find(*c.parent);
    if (it == index_.end()) data_error("taxonomy: unknown parent '" + *c.parent + "' of '" + c.code + "'");
    // Parents must be roots: exactly two levels, which also rules out cycles.
    if (categories_[it->second].parent) {
      data_error("taxonomy: '" + c.code + "' is deeper than two levels");
    }
  }
}

LabelTaxonomy LabelTaxonomy::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) data_error("cannot read taxonomy " + path);
  std::vector<Category> cats;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      const json rec = json::parse(line);
      Category c;
      c.code = require_string(rec, "code");
      c.name = require_string(rec, "name");
      if (auto it = rec.find("parent"); it != rec.end() && !it->is_null()) {
        if (!it->is_string()) throw std::invalid_argument("field 'parent' must be string or null");
        c.parent = it->get<std::string>();
      }
      cats.push_back(std::move(c));
    } catch (const std::exception& e) {
      data_error(line_error(path, lineno, std::string("malformed taxonomy record: ") + e.what()));
    }
  }
  return LabelTaxonomy(std::move(cats));
}

bool LabelTaxonomy::contains(std::string_view code) const { return index_.find(code) != index_.end(); }

const Category& LabelTaxonomy::at(std::string_view code) const {
  auto it = index_.find(code);
  if (it == index_.end()) data_error("unknown category code '" + std::string(code) + "'");
  return categories_[it->second];
}

int LabelTaxonomy::level(std::string_view code) const { return at(code).parent ? 2 : 1; }

std::vector<std::string> LabelTaxonomy::codes_at_level(int lvl) const {
  std::vector<std::string> out;
  for (const auto& c : categories_) {
    if ((c.parent ? 2 : 1) == lvl) out.push_back(c.code);
  }
  std::sort(out.begin(), out.end());
  return out;
}

std::optional<std::string> LabelTaxonomy::project(std::string_view code, int lvl) const {
  const Category& c = at(code);
  const int own = c.parent ? 2 : 1;
  if (own == lvl) return c.code;
  if (own == 2 && lvl == 1) return *c.parent;
  return std::nullopt;
}

// ---- corpus --------------------------------------------------------------

Corpus::Corpus(std::vector<Document> documents, LabelTaxonomy taxonomy)
    : documents_(std::move(documents)), taxonomy_(std::move(taxonomy)) {
  if (documents_.empty()) data_error("corpus is empty");
  level1_.resize(documents_.size());
  level2_.resize(documents_.size());
  for (std::size_t i = 0; i < documents_.size(); ++i) {
    auto& d = documents_[i];
    if (!by_id_.emplace(d.id, i).second) data_error("duplicate document id '" + d.id + "'");
    if (d.categories.empty()) data_error("document '" + d.id + "': empty categories");
    std::sort(d.categories.begin(), d.categories.end());
    d.categories.erase(std::unique(d.categories.begin(), d.categories.end()), d.categories.end());
    for (const auto& code : d.categories) {
      if (!taxonomy_.contains(code)) {
        data_error("document '" + d.id + "': unknown category code '" + code + "'");
      }
      if (auto p = taxonomy_.project(code, 1)) level1_[i].push_back(*p);
      if (auto p = taxonomy_.project(code, 2)) level2_[i].push_back(*p);
    }
    for (auto* v : {&level1_[i], &level2_[i]}) {
      std::sort(v->begin(), v->end());
      v->erase(std::unique(v->begin(), v->end()), v->end());
    }
  }
}

std::optional<std::size_t> Corpus::find(std::string_view id) const {
  auto it = by_id_.find(std::string(id));
  if (it == by_id_.end()) return std::nullopt;
  return it->second;
}

const std::vector<std::string>& Corpus::labels(std::size_t i, int level) const {
  if (level == 1) return level1_.at(i);
  if (level == 2) return level2_.at(i);
  config_error("taxonomy level must be 1 or 2, got " + std::to_string(level));
}

std::vector<std::size_t> Corpus::members(std::string_view code) const {
  const int lvl = taxonomy_.level(code);
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < documents_.size(); ++i) {
    const auto& labs = labels(i, lvl);
    if (std::binary_search(labs.begin(), labs.end(), code)) out.push_back(i);
  }
  return out;
}

Corpus Corpus::subset(std::span<const std::size_t> indices) const {
  std::vector<Document> docs;
  docs.reserve(indices.size());
  for (auto i : indices) docs.push_back(documents_.at(i));
  return Corpus(std::move(docs), taxonomy_);
}

std::string Corpus::content_hash() const {
  Fnv1a h;
  for (const auto& d : documents_) {
    h.update(d.id);
    h.update("\x1f");
    h.update(d.text());
    for (const auto& c : d.categories) {
      h.update("\x1f");
      h.update(c);
    }
    h.update("\x1e");
  }
  return h.hex();
}

Corpus load_corpus(const std::string& path, const LabelTaxonomy& taxonomy) {
  std::ifstream in(path);
  if (!in) data_error("cannot read corpus " + path);
  std::vector<Document> docs;
  std::unordered_map<std::string, std::size_t> seen;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    Document d;
    try {
      const json rec = json::parse(line);
      if (!rec.is_object()) throw std::invalid_argument("record is not an object");
      d.id = require_string(rec, "id");
      d.title = require_string(rec, "title");
      d.abstract = require_string(rec, "abstract");
      auto cats = rec.find("categories");
      if (cats == rec.end() || !cats->is_array()) throw std::invalid_argument("missing array field 'categories'");
      for (const auto& c : *cats) {
        if (!c.is_string()) throw std::invalid_argument("non-string category code");
        d.categories.push_back(c.get<std::string>());
      }
    } catch (const std::exception& e) {
      data_error(line_error(path, lineno, std::string("malformed record: ") + e.what()));
    }
    if (d.categories.empty()) data_error(line_error(path, lineno, "document '" + d.id + "': empty categories"));
    if (auto [it, fresh] = seen.emplace(d.id, lineno); !fresh) {
      data_error(line_error(path, lineno,
                            "duplicate id '" + d.id + "' (first seen on line " + std::to_string(it->second) + ")"));
    }
    for (const auto& c : d.categories) {
      if (!taxonomy.contains(c)) data_error(line_error(path, lineno, "unknown category code '" + c + "'"));
    }
    docs.push_back(std::move(d));
  }
  if (docs.empty()) data_error(path + ": corpus is empty");
  return Corpus(std::move(docs), taxonomy);
}

// ---- tokenization --------------------------------------------------------

std::set<std::string, std::less<>> load_stopwords(const std::string& path) {
  std::ifstream in(path);
  if (!in) data_error("cannot read stopword list " + path);
  std::set<std::string, std::less<>> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    while (!line.empty() && (line.back() == '\r' || line.back() == ' ' || line.back() == '\t')) line.pop_back();
    const auto start = line.find_first_not_of(" \t");
    if (start == std::string::npos || line[start] == '#') continue;
    std::string term = line.substr(start);
    if (to_lower(term) != term) data_error(line_error(path, lineno, "stopword '" + term + "' is not lowercase"));
    out.insert(std::move(term));
  }
  return out;
}

std::string to_lower(std::string_view text) {
  std::string out;
  out.reserve(text.size());
  for (std::size_t i = 0; i < text.size();) {
    const auto start = i;
    const char32_t cp = next_code_point(text, i);
    const char32_t lo = lower_code_point(cp);
    if (lo == cp && cp != 0xFFFD) {
      out.append(text.substr(start, i - start));
    } else {
      append_utf8(out, lo);
    }
  }
  return out;
}

bool is_punctuation(std::string_view term) {
  if (term.empty()) return false;
  for (std::size_t i = 0; i < term.size();) {
    if (is_alnum(next_code_point(term, i))) return false;
  }
  return true;
}

std::vector<std::string> tokenize(std::string_view text, const TokenizationPolicy& policy) {
  std::vector<std::string> out;
  std::string word;
  auto flush = [&] {
    if (word.empty()) return;
    std::string term = policy.lowercase ? to_lower(word) : word;
    word.clear();
    if (!policy.stopwords.empty() && policy.is_stopword(term)) return;
    out.push_back(std::move(term));
  };
  for (std::size_t i = 0; i < text.size();) {
    const auto start = i;
    const char32_t cp = next_code_point(text, i);
    if (is_alnum(cp)) {
      word.append(text.substr(start, i - start));
      continue;
    }
    flush();
    if (policy.keep_punctuation && !is_space(cp) && cp != 0xFFFD && cp >= 0x20) {
      std::string punct(text.substr(start, i - start));
      if (policy.stopwords.empty() || !policy.is_stopword(punct)) out.push_back(std::move(punct));
    }
  }
  flush();
  return out;
}

// ---- folds ---------------------------------------------------------------

FoldAssignment::FoldAssignment(int k, std::vector<int> fold_of) : k_(k), fold_of_(std::move(fold_of)) {
  if (k_ < 2) config_error("fold count must be >= 2");
  for (int f : fold_of_) {
    if (f < 0 || f >= k_) data_error("fold index out of range");
  }
}

std::vector<std::size_t> FoldAssignment::test_indices(int f) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < fold_of_.size(); ++i) {
    if (fold_of_[i] == f) out.push_back(i);
  }
  return out;
}

std::vector<std::size_t> FoldAssignment::train_indices(int f) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < fold_of_.size(); ++i) {
    if (fold_of_[i] != f) out.push_back(i);
  }
  return out;
}

FoldAssignment make_folds(const Corpus& corpus, int k, std::uint64_t seed) {
  const std::size_t n = corpus.size();
  if (k < 2 || static_cast<std::size_t>(k) > n) {
    config_error("fold count " + std::to_string(k) + " out of range [2, " + std::to_string(n) + "]");
  }
  // mt19937_64's output sequence is fixed by the standard; the distribution
  // classes are not, so bounded draws use rejection sampling directly.
  std::mt19937_64 rng(seed);
  auto below = [&rng](std::uint64_t bound) {
    const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() - std::numeric_limits<std::uint64_t>::max() % bound;
    std::uint64_t x;
    do {
      x = rng();
    } while (x >= limit);
    return x % bound;
  };
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  for (std::size_t i = n - 1; i > 0; --i) std::swap(order[i], order[below(i + 1)]);
  std::vector<int> fold_of(n);
  for (std::size_t pos = 0; pos < n; ++pos) fold_of[order[pos]] = static_cast<int>(pos % static_cast<std::size_t>(k));
  return FoldAssignment(k, std::move(fold_of));
}

// ---- vocabulary ----------------------------------------------------------

Vocabulary::Vocabulary(const Corpus& corpus, const TokenizationPolicy& policy) {
  doc_counts_.resize(corpus.size());
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    for (auto& t : tokenize(corpus.document(i).text(), policy)) ++doc_counts_[i][std::move(t)];
    for (const auto& [term, count] : doc_counts_[i]) {
      auto& e = entries_[term];
      e.docs.push_back(i);
      e.tf += count;
    }
  }
  terms_.reserve(entries_.size());
  for (const auto& [term, _] : entries_) terms_.push_back(term);
}

const Vocabulary::Entry* Vocabulary::lookup(std::string_view term) const {
  auto it = entries_.find(term);
  return it == entries_.end() ? nullptr : &it->second;
}

bool Vocabulary::contains(std::string_view term) const { return lookup(term) != nullptr; }

std::span<const std::size_t> Vocabulary::presence(std::string_view term) const {
  const Entry* e = lookup(term);
  if (!e) return {};
  return e->docs;
}

std::uint64_t Vocabulary::term_frequency(std::string_view term) const {
  const Entry* e = lookup(term);
  return e ? e->tf : 0;
}

}  // namespace attnsel::corpus
