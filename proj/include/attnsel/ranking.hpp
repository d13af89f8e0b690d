#pragma once

#include <cstddef>
#include <iosfwd>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

namespace attnsel::featsel {

enum class Method { Attention, Chi, Ig, Df, Pd };
enum class Weighting { None, Tf, TfIdf };

std::string_view to_string(Method m);
std::string_view to_string(Weighting w);
Method parse_method(std::string_view s);
Weighting parse_weighting(std::string_view s);

/// Identifies a ranking: base method plus optional re-weighting, e.g. "chi+tfidf".
struct RankingTag {
  Method method = Method::Attention;
  Weighting weighting = Weighting::None;

  std::string str() const;
  static RankingTag parse(std::string_view s);
  friend auto operator<=>(const RankingTag&, const RankingTag&) = default;
};

struct ScoredTerm {
  std::string term;
  double score = 0.0;
  friend bool operator==(const ScoredTerm&, const ScoredTerm&) = default;
};

/// Terms ordered by score descending, ties broken by term ascending.
class TermRanking {
 public:
  TermRanking() = default;
  /// Sorts `entries`; throws Error(Data) on duplicate terms or NaN scores.
  TermRanking(RankingTag tag, std::vector<ScoredTerm> entries);

  const RankingTag& tag() const noexcept { return tag_; }
  const std::vector<ScoredTerm>& entries() const noexcept { return entries_; }
  std::size_t size() const noexcept { return entries_.size(); }
  bool empty() const noexcept { return entries_.empty(); }

  /// First min(k, size) terms in rank order.
  std::vector<std::string> top(std::size_t k) const;
  std::set<std::string> top_set(std::size_t k) const;
  std::optional<std::size_t> rank_of(std::string_view term) const;  // 1-based

  friend bool operator==(const TermRanking&, const TermRanking&) = default;

 private:
  RankingTag tag_;
  std::vector<ScoredTerm> entries_;
};

/// Tab-separated `rank, term, score, method` with a header row.
void write_ranking(std::ostream& out, const TermRanking& ranking);
TermRanking read_ranking(std::istream& in, const std::string& origin);

}  // namespace attnsel::featsel
