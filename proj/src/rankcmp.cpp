#include "attnsel/rankcmp.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_set>

#include "attnsel/common.hpp"

namespace attnsel::rankcmp {

double overlap_at_k(const featsel::TermRanking& a, const featsel::TermRanking& b, std::size_t k) {
  if (k == 0) config_error("overlap_at_k: k must be >= 1");
  const auto sa = a.top_set(k);
  const auto sb = b.top_set(k);
  std::size_t common = 0;
  for (const auto& t : sa) common += sb.count(t);
  return static_cast<double>(common) / static_cast<double>(k);
}

RboResult rbo(std::span<const std::string> a, std::span<const std::string> b, const RboParams& params) {
  if (!(params.p > 0.0 && params.p < 1.0)) config_error("rbo: p must lie in (0, 1)");
  if (a.empty() || b.empty()) data_error("rbo: empty ranking");
  const std::size_t depth = params.depth.value_or(std::max(a.size(), b.size()));
  if (depth == 0) config_error("rbo: depth must be >= 1");

  // Incremental overlap: an item adds to the overlap the first time it has been
  // seen in both prefixes.
  std::unordered_set<std::string_view> seen_a, seen_b;
  std::size_t overlap = 0;
  double weight = 1.0;  // p^{d-1}
  double sum = 0.0;
  double agreement = 0.0;
  for (std::size_t d = 1; d <= depth; ++d) {
    if (d <= a.size()) {
      const std::string_view x = a[d - 1];
      if (seen_a.insert(x).second && seen_b.contains(x)) ++overlap;
    }
    if (d <= b.size()) {
      const std::string_view y = b[d - 1];
      if (seen_b.insert(y).second && seen_a.contains(y)) ++overlap;
    }
    agreement = static_cast<double>(overlap) / static_cast<double>(d);
    sum += weight * agreement;
    weight *= params.p;
  }
  RboResult r;
  r.min = (1.0 - params.p) * sum;
  r.residual = weight;  // p^D
  r.ext = r.min + agreement * weight;
  return r;
}

RboResult rbo(const featsel::TermRanking& a, const featsel::TermRanking& b, const RboParams& params) {
  const auto ta = a.top(a.size());
  const auto tb = b.top(b.size());
  return rbo(std::span<const std::string>(ta), std::span<const std::string>(tb), params);
}

double rbo_prefix_weight(std::size_t d, double p) {
  if (d == 0) config_error("rbo_prefix_weight: d must be >= 1");
  if (!(p > 0.0 && p < 1.0)) config_error("rbo_prefix_weight: p must lie in (0, 1)");
  // 1 - p^{d-1} + ((1-p)/p) d (ln(1/(1-p)) - Σ_{i=1}^{d-1} p^i / i)
  double tail = 0.0;
  double pi = 1.0;
  for (std::size_t i = 1; i < d; ++i) {
    pi *= p;
    tail += pi / static_cast<double>(i);
  }
  const double dd = static_cast<double>(d);
  return 1.0 - std::pow(p, dd - 1.0) + ((1.0 - p) / p) * dd * (-std::log1p(-p) - tail);
}

double jaccard(const std::set<std::string>& a, const std::set<std::string>& b) {
  if (a.empty() && b.empty()) return 1.0;
  std::size_t common = 0;
  for (const auto& t : a) common += b.count(t);
  const std::size_t uni = a.size() + b.size() - common;
  return static_cast<double>(common) / static_cast<double>(uni);
}

StabilityReport stability(std::vector<std::set<std::string>> fold_sets, std::string method) {
  const std::size_t k = fold_sets.size();
  if (k < 2) data_error("stability needs at least 2 fold selections, got " + std::to_string(k));
  StabilityReport r;
  r.method = std::move(method);
  r.pairwise.assign(k, std::vector<double>(k, 1.0));
  double sum = 0.0;
  for (std::size_t i = 0; i < k; ++i) {
    for (std::size_t j = i + 1; j < k; ++j) {
      const double v = jaccard(fold_sets[i], fold_sets[j]);
      r.pairwise[i][j] = r.pairwise[j][i] = v;
      sum += v;
    }
  }
  r.mean_jaccard = sum / static_cast<double>(k * (k - 1) / 2);
  r.fold_sets = std::move(fold_sets);
  return r;
}

}  // namespace attnsel::rankcmp
