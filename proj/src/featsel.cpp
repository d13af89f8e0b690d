#include "attnsel/featsel.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "attnsel/common.hpp"
#include "attnsel/parallel.hpp"

namespace attnsel::featsel {

namespace {

double xlog2x(double p) { return p > 0.0 ? p * std::log2(p) : 0.0; }

double binary_entropy(double p) { return -(xlog2x(p) + xlog2x(1.0 - p)); }

std::size_t intersection_size(std::span<const std::size_t> x, std::span<const std::size_t> y) {
  std::size_t n = 0;
  auto i = x.begin();
  auto j = y.begin();
  while (i != x.end() && j != y.end()) {
    if (*i < *j) {
      ++i;
    } else if (*j < *i) {
      ++j;
    } else {
      ++n;
      ++i;
      ++j;
    }
  }
  return n;
}

double category_score(Method method, const ContingencyTable& t) {
  switch (method) {
    case Method::Chi: return chi_square(t);
    case Method::Ig: return info_gain(t);
    case Method::Pd: return prop_difference(t).value_or(-1.0);
    default: break;
  }
  config_error("method " + std::string(to_string(method)) + " has no per-category score");
}

std::vector<std::string> candidate_terms(const corpus::Vocabulary& vocab, const corpus::TokenizationPolicy& policy,
                                         std::uint64_t min_df) {
  std::vector<std::string> out;
  for (const auto& t : vocab.terms()) {
    if (is_rankable(t, policy) && vocab.presence(t).size() >= min_df) out.push_back(t);
  }
  return out;
}

void require_selector(Method method) {
  if (method == Method::Attention) config_error("attention is not a feature-selection method");
}

}  // namespace

ContingencyTable build_contingency(std::span<const std::size_t> presence, std::span<const std::size_t> members,
                                   std::size_t num_documents) {
  ContingencyTable t;
  t.a = intersection_size(presence, members);
  t.b = presence.size() - t.a;
  t.c = members.size() - t.a;
  t.d = num_documents - t.a - t.b - t.c;
  return t;
}

ContingencyTable build_contingency(const corpus::Corpus& corpus, const corpus::Vocabulary& vocab,
                                   std::string_view term, std::string_view category) {
  if (!vocab.contains(term)) data_error("unknown term '" + std::string(term) + "'");
  if (!corpus.taxonomy().contains(category)) data_error("unknown category '" + std::string(category) + "'");
  const auto members = corpus.members(category);
  return build_contingency(vocab.presence(term), members, corpus.size());
}

double chi_square(const ContingencyTable& t) {
  const double a = static_cast<double>(t.a), b = static_cast<double>(t.b);
  const double c = static_cast<double>(t.c), d = static_cast<double>(t.d);
  const double denom = (a + c) * (b + d) * (a + b) * (c + d);
  if (denom == 0.0) return 0.0;
  const double cross = a * d - c * b;
  return static_cast<double>(t.n()) * cross * cross / denom;
}

double class_entropy(const ContingencyTable& t) {
  const double n = static_cast<double>(t.n());
  if (n == 0.0) return 0.0;
  return binary_entropy(static_cast<double>(t.a + t.c) / n);
}

double info_gain(const ContingencyTable& t) {
  const double n = static_cast<double>(t.n());
  if (n == 0.0) return 0.0;
  const double with = static_cast<double>(t.a + t.b);
  const double without = static_cast<double>(t.c + t.d);
  double conditional = 0.0;
  if (with > 0.0) conditional += (with / n) * binary_entropy(static_cast<double>(t.a) / with);
  if (without > 0.0) conditional += (without / n) * binary_entropy(static_cast<double>(t.c) / without);
  // Rounding can leave a tiny negative residue for independent splits.
  return std::max(0.0, class_entropy(t) - conditional);
}

std::optional<double> prop_difference(const ContingencyTable& t) {
  if (t.a + t.b == 0) return std::nullopt;
  return (static_cast<double>(t.a) - static_cast<double>(t.b)) / static_cast<double>(t.a + t.b);
}

std::size_t doc_frequency(std::string_view term, const corpus::Vocabulary& vocab) {
  return vocab.presence(term).size();
}

bool is_rankable(std::string_view term, const corpus::TokenizationPolicy& policy) {
  if (term.empty() || corpus::is_punctuation(term)) return false;
  return !policy.is_stopword(policy.lowercase ? corpus::to_lower(term) : std::string(term));
}

TermRanking rank_terms(Method method, const corpus::Corpus& corpus, const corpus::Vocabulary& vocab,
                       const corpus::TokenizationPolicy& policy, const RankOptions& options) {
  require_selector(method);
  const auto terms = candidate_terms(vocab, policy, options.min_df);
  std::vector<ScoredTerm> entries(terms.size());
  if (method == Method::Df) {
    for (std::size_t i = 0; i < terms.size(); ++i) {
      entries[i] = {terms[i], static_cast<double>(vocab.presence(terms[i]).size())};
    }
    return TermRanking({method, Weighting::None}, std::move(entries));
  }
  const auto codes = corpus.taxonomy().codes_at_level(options.level);
  std::vector<std::vector<std::size_t>> members;
  members.reserve(codes.size());
  for (const auto& code : codes) members.push_back(corpus.members(code));
  const std::size_t n = vocab.num_documents();
  parallel_for(terms.size(), options.jobs, [&](std::size_t i) {
    const auto presence = vocab.presence(terms[i]);
    double best = -std::numeric_limits<double>::infinity();
    for (const auto& m : members) best = std::max(best, category_score(method, build_contingency(presence, m, n)));
    entries[i] = {terms[i], members.empty() ? 0.0 : best};
  });
  return TermRanking({method, Weighting::None}, std::move(entries));
}

TermRanking rank_terms_for_category(Method method, std::string_view category, const corpus::Corpus& corpus,
                                    const corpus::Vocabulary& vocab, const corpus::TokenizationPolicy& policy,
                                    const RankOptions& options) {
  require_selector(method);
  if (!corpus.taxonomy().contains(category)) data_error("unknown category '" + std::string(category) + "'");
  const auto members = corpus.members(category);
  const std::size_t n = vocab.num_documents();
  std::vector<ScoredTerm> entries;
  for (const auto& term : candidate_terms(vocab, policy, options.min_df)) {
    const auto t = build_contingency(vocab.presence(term), members, n);
    if (method == Method::Df) {
      if (t.a > 0) entries.push_back({term, static_cast<double>(t.a)});
    } else if (method == Method::Pd) {
      entries.push_back({term, *prop_difference(t)});
    } else {
      entries.push_back({term, category_score(method, t)});
    }
  }
  return TermRanking({method, Weighting::None}, std::move(entries));
}

TermRanking weight_ranking(const TermRanking& ranking, const corpus::Vocabulary& vocab, Weighting scheme) {
  if (scheme == Weighting::None) return ranking;
  const double n = static_cast<double>(vocab.num_documents());
  std::vector<ScoredTerm> entries;
  entries.reserve(ranking.size());
  for (const auto& e : ranking.entries()) {
    const double tf = static_cast<double>(vocab.term_frequency(e.term));
    double score = tf;
    if (scheme == Weighting::TfIdf) {
      const double df = static_cast<double>(vocab.presence(e.term).size());
      score = df > 0.0 ? tf * std::log(n / df) : 0.0;
    }
    entries.push_back({e.term, score});
  }
  return TermRanking({ranking.tag().method, scheme}, std::move(entries));
}

}  // namespace attnsel::featsel
