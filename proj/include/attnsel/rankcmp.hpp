#pragma once

#include <cstddef>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "attnsel/ranking.hpp"

namespace attnsel::rankcmp {

/// |top-k(a) ∩ top-k(b)| / k. A ranking shorter than k contributes all its terms.
double overlap_at_k(const featsel::TermRanking& a, const featsel::TermRanking& b, std::size_t k);

struct RboParams {
  double p = 0.9;
  /// Evaluation depth; defaults to the longer list's length.
  std::optional<std::size_t> depth;
};

struct RboResult {
  double min = 0.0;       // (1-p) Σ_{d<=D} p^{d-1} A_d
  double residual = 0.0;  // largest mass the unseen tail could still add
  double ext = 0.0;       // min + A_D p^D
};

/// Rank-biased overlap with extrapolation, for possibly non-conjoint lists of
/// different lengths. Past the end of the shorter list its prefix stays whole.
RboResult rbo(std::span<const std::string> a, std::span<const std::string> b, const RboParams& params);
RboResult rbo(const featsel::TermRanking& a, const featsel::TermRanking& b, const RboParams& params);

/// Share of total RBO weight carried by ranks 1..d at persistence p.
double rbo_prefix_weight(std::size_t d, double p);

double jaccard(const std::set<std::string>& a, const std::set<std::string>& b);

struct StabilityReport {
  std::string method;
  std::vector<std::set<std::string>> fold_sets;
  std::vector<std::vector<double>> pairwise;  // symmetric, unit diagonal
  double mean_jaccard = 0.0;
};

/// Mean Jaccard over all unordered pairs of fold selections; needs >= 2 folds.
StabilityReport stability(std::vector<std::set<std::string>> fold_sets, std::string method);

}  // namespace attnsel::rankcmp
