#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "attnsel/corpus.hpp"
#include "attnsel/ranking.hpp"

namespace attnsel::featsel {

/// Document counts for one (term, category) pair.
///   a: in category, has term      b: outside category, has term
///   c: in category, lacks term    d: outside category, lacks term
struct ContingencyTable {
  std::uint64_t a = 0, b = 0, c = 0, d = 0;
  std::uint64_t n() const noexcept { return a + b + c + d; }
  friend bool operator==(const ContingencyTable&, const ContingencyTable&) = default;
};

/// `members` are the sorted indices of documents in the category.
ContingencyTable build_contingency(std::span<const std::size_t> presence, std::span<const std::size_t> members,
                                   std::size_t num_documents);
/// Checked variant: throws on a term absent from the vocabulary or an unknown category.
ContingencyTable build_contingency(const corpus::Corpus& corpus, const corpus::Vocabulary& vocab,
                                   std::string_view term, std::string_view category);

double chi_square(const ContingencyTable& t);
/// Entropy of binary category membership (bits).
double class_entropy(const ContingencyTable& t);
double info_gain(const ContingencyTable& t);
/// nullopt when the term occurs in no document (a + b == 0).
std::optional<double> prop_difference(const ContingencyTable& t);
std::size_t doc_frequency(std::string_view term, const corpus::Vocabulary& vocab);

/// Stopwords and pure-punctuation terms never enter a feature-selection ranking.
bool is_rankable(std::string_view term, const corpus::TokenizationPolicy& policy);

struct RankOptions {
  int level = 1;
  std::uint64_t min_df = 1;
  unsigned jobs = 1;
};

/// Corpus-wide ranking; chi/ig/pd take the max over categories at `level`.
TermRanking rank_terms(Method method, const corpus::Corpus& corpus, const corpus::Vocabulary& vocab,
                       const corpus::TokenizationPolicy& policy, const RankOptions& options = {});

/// Ranking for a single category. df counts presence inside the category.
TermRanking rank_terms_for_category(Method method, std::string_view category, const corpus::Corpus& corpus,
                                    const corpus::Vocabulary& vocab, const corpus::TokenizationPolicy& policy,
                                    const RankOptions& options = {});

/// Re-scores the ranking's terms by corpus TF or TF x ln(N / df) and re-sorts.
/// Terms unseen in the corpus score 0.
TermRanking weight_ranking(const TermRanking& ranking, const corpus::Vocabulary& vocab, Weighting scheme);

}  // namespace attnsel::featsel
