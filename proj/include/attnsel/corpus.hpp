#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace attnsel::corpus {

/// A labelled article. Analysis text is `title + " " + abstract`.
struct Document {
  std::string id;
  std::string title;
  std::string abstract;
  std::vector<std::string> categories;  // sorted, unique

  std::string text() const { return title + " " + abstract; }
};

struct Category {
  std::string code;
  std::string name;
  std::optional<std::string> parent;
};

/// Two-level category tree (first-level roots, second-level children).
class LabelTaxonomy {
 public:
  LabelTaxonomy() = default;
  explicit LabelTaxonomy(std::vector<Category> categories);

  static LabelTaxonomy load(const std::string& path);

  bool contains(std::string_view code) const;
  const Category& at(std::string_view code) const;
  /// 1 for roots, 2 for their children.
  int level(std::string_view code) const;
  /// Codes at `level`, sorted.
  std::vector<std::string> codes_at_level(int level) const;
  /// The ancestor (or self) of `code` at `level`; nullopt when `code` is shallower.
  std::optional<std::string> project(std::string_view code, int level) const;

  std::span<const Category> categories() const noexcept { return categories_; }

 private:
  std::vector<Category> categories_;
  std::map<std::string, std::size_t, std::less<>> index_;
};

class Corpus {
 public:
  Corpus(std::vector<Document> documents, LabelTaxonomy taxonomy);

  std::span<const Document> documents() const noexcept { return documents_; }
  const Document& document(std::size_t i) const { return documents_.at(i); }
  std::size_t size() const noexcept { return documents_.size(); }
  const LabelTaxonomy& taxonomy() const noexcept { return taxonomy_; }

  std::optional<std::size_t> find(std::string_view id) const;

  /// Category codes of document `i` projected to `level` (sorted, unique).
  const std::vector<std::string>& labels(std::size_t i, int level) const;
  /// Sorted indices of documents carrying `code` (after projection to its level).
  std::vector<std::size_t> members(std::string_view code) const;

  /// Documents at `indices`, in that order, sharing this taxonomy.
  Corpus subset(std::span<const std::size_t> indices) const;

  /// Hash over ids, texts and labels; identifies the corpus in manifests.
  std::string content_hash() const;

 private:
  std::vector<Document> documents_;
  LabelTaxonomy taxonomy_;
  std::unordered_map<std::string, std::size_t> by_id_;
  std::vector<std::vector<std::string>> level1_;
  std::vector<std::vector<std::string>> level2_;
};

/// Reads the line-delimited corpus file; failures name the offending line.
Corpus load_corpus(const std::string& path, const LabelTaxonomy& taxonomy);

struct TokenizationPolicy {
  bool lowercase = true;
  bool keep_punctuation = false;
  std::set<std::string, std::less<>> stopwords;

  bool is_stopword(std::string_view term) const { return stopwords.contains(term); }
};

/// One lowercase term per line; blank lines and `#` comments skipped.
std::set<std::string, std::less<>> load_stopwords(const std::string& path);

/// Splits on non-alphanumeric code points. Each punctuation code point becomes
/// its own token when the policy keeps punctuation; whitespace never does.
std::vector<std::string> tokenize(std::string_view text, const TokenizationPolicy& policy);

/// True when the term has no letter or digit.
bool is_punctuation(std::string_view term);

/// Lowercases ASCII, Latin-1, Latin Extended-A, Greek and Cyrillic capitals.
std::string to_lower(std::string_view text);

class FoldAssignment {
 public:
  FoldAssignment(int k, std::vector<int> fold_of);

  int k() const noexcept { return k_; }
  int fold_of(std::size_t doc) const { return fold_of_.at(doc); }
  std::span<const int> assignment() const noexcept { return fold_of_; }
  /// Sorted document indices in fold `f`.
  std::vector<std::size_t> test_indices(int f) const;
  /// Sorted document indices outside fold `f`.
  std::vector<std::size_t> train_indices(int f) const;

 private:
  int k_;
  std::vector<int> fold_of_;
};

/// Seeded Fisher-Yates shuffle followed by round-robin dealing.
FoldAssignment make_folds(const Corpus& corpus, int k, std::uint64_t seed);

/// Term inventory of a corpus: presence index plus raw counts.
class Vocabulary {
 public:
  Vocabulary(const Corpus& corpus, const TokenizationPolicy& policy);

  std::size_t num_documents() const noexcept { return doc_counts_.size(); }
  /// All terms, sorted.
  const std::vector<std::string>& terms() const noexcept { return terms_; }
  bool contains(std::string_view term) const;
  /// Sorted indices of documents containing `term`; empty for unseen terms.
  std::span<const std::size_t> presence(std::string_view term) const;
  /// Total occurrences of `term` across the corpus.
  std::uint64_t term_frequency(std::string_view term) const;
  /// Term -> occurrence count for document `doc`.
  const std::map<std::string, std::uint32_t, std::less<>>& counts(std::size_t doc) const {
    return doc_counts_.at(doc);
  }

 private:
  struct Entry {
    std::vector<std::size_t> docs;
    std::uint64_t tf = 0;
  };
  const Entry* lookup(std::string_view term) const;

  std::vector<std::string> terms_;
  std::map<std::string, Entry, std::less<>> entries_;
  std::vector<std::map<std::string, std::uint32_t, std::less<>>> doc_counts_;
};

inline Vocabulary build_vocabulary(const Corpus& corpus, const TokenizationPolicy& policy) {
  return Vocabulary(corpus, policy);
}

}  // namespace attnsel::corpus
