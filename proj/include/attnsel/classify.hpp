#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "attnsel/corpus.hpp"
#include "attnsel/ranking.hpp"

namespace attnsel::classify {

enum class FeatureWeighting { Binary, Tf, TfIdf };
std::string_view to_string(FeatureWeighting w);
FeatureWeighting parse_feature_weighting(std::string_view s);

class FeatureSpace {
 public:
  FeatureSpace(std::vector<std::string> terms, FeatureWeighting weighting);
  /// The first k terms of `ranking` (fewer if the ranking is shorter).
  static FeatureSpace from_ranking(const featsel::TermRanking& ranking, std::size_t k, FeatureWeighting weighting);

  const std::vector<std::string>& terms() const noexcept { return terms_; }
  std::size_t size() const noexcept { return terms_.size(); }
  FeatureWeighting weighting() const noexcept { return weighting_; }
  /// Column of `term`, or -1.
  long index_of(std::string_view term) const;

 private:
  std::vector<std::string> terms_;
  std::unordered_map<std::string, std::size_t> index_;
  FeatureWeighting weighting_;
};

/// Document frequencies (from training documents) needed by tf-idf.
struct CorpusStats {
  std::size_t num_documents = 0;
  std::vector<std::size_t> df;  // aligned with the feature space

  static CorpusStats from(const corpus::Vocabulary& vocab, const FeatureSpace& space);
};

struct SparseVector {
  std::size_t dim = 0;
  std::vector<std::pair<std::uint32_t, double>> entries;  // sorted by column
};

SparseVector vectorize(const std::map<std::string, std::uint32_t, std::less<>>& term_counts,
                       const FeatureSpace& space, const CorpusStats& stats);
SparseVector vectorize(const corpus::Document& doc, const FeatureSpace& space, const CorpusStats& stats,
                       const corpus::TokenizationPolicy& policy);

enum class ModelKind { NaiveBayes, LogisticRegression };
std::string_view to_string(ModelKind k);
ModelKind parse_model_kind(std::string_view s);

/// One-vs-rest linear scorer: p(category | x) = sigmoid(w·x + b).
struct LinearModel {
  ModelKind kind = ModelKind::NaiveBayes;
  std::size_t dim = 0;
  std::vector<std::string> categories;
  std::vector<std::vector<double>> weights;
  std::vector<double> bias;
};

/// Per-document label sets, aligned with the training vectors.
using LabelSets = std::vector<std::vector<std::string>>;

/// Multinomial naive Bayes per category (category vs. rest), Laplace
/// smoothing `alpha`, stored as log-odds weights. A category without positive
/// or without negative examples gets a smoothed prior-only model.
LinearModel train_nb(std::span<const SparseVector> docs, const LabelSets& labels,
                     const std::vector<std::string>& categories, double alpha);

struct LogRegParams {
  double l2 = 1e-4;
  int epochs = 300;
  double step = 0.1;
  std::uint64_t seed = 42;
};

/// Mean log loss + (l2/2)|w|^2 (bias unregularised) and its gradient.
/// `params` holds the weights followed by the bias.
struct LossAndGradient {
  double loss = 0.0;
  std::vector<double> gradient;
};
LossAndGradient logreg_objective(std::span<const SparseVector> docs, std::span<const int> targets,
                                 std::span<const double> params, double l2);

struct BinaryFit {
  std::vector<double> weights;
  double bias = 0.0;
  std::vector<double> loss_history;  // loss before each epoch, then final
};
/// Full-batch gradient descent. Throws Error(Data) when the loss stops being finite.
BinaryFit fit_logreg_binary(std::span<const SparseVector> docs, std::span<const int> targets, std::size_t dim,
                            const LogRegParams& params, std::uint64_t stream = 0);

LinearModel train_logreg(std::span<const SparseVector> docs, const LabelSets& labels,
                         const std::vector<std::string>& categories, const LogRegParams& params);

/// Probability per category; throws on dimension mismatch.
std::vector<double> predict(const LinearModel& model, const SparseVector& x);
inline constexpr double kDecisionThreshold = 0.5;

struct Confusion {
  std::uint64_t tp = 0, fp = 0, fn = 0, tn = 0;
  Confusion& operator+=(const Confusion& o) {
    tp += o.tp;
    fp += o.fp;
    fn += o.fn;
    tn += o.tn;
    return *this;
  }
};

struct Metrics {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  double macro_f1 = 0.0;
};
/// Micro scores from the pooled counts; macro F1 over categories with any
/// positive or predicted instance.
Metrics score(const std::vector<Confusion>& per_category);

/// Produces the ranking a feature space is cut from, using training data only.
struct FeatureSource {
  std::string name;
  std::function<featsel::TermRanking(const corpus::Corpus& train, const corpus::Vocabulary& train_vocab,
                                     std::span<const std::size_t> train_indices)>
      rank;
};

struct CvOptions {
  int level = 1;
  std::vector<std::size_t> k_grid{100, 500, 1000, 5000};
  std::vector<FeatureWeighting> weightings{FeatureWeighting::Binary};
  std::vector<ModelKind> models{ModelKind::NaiveBayes, ModelKind::LogisticRegression};
  double nb_alpha = 1.0;
  LogRegParams logreg;
  corpus::TokenizationPolicy policy;
  unsigned jobs = 1;
};

struct EvalRow {
  std::string feature_method;
  std::size_t k = 0;
  FeatureWeighting weighting = FeatureWeighting::Binary;
  ModelKind model = ModelKind::NaiveBayes;
  int fold = -1;  // -1: pooled over folds
  Metrics metrics;
};

struct EvalReport {
  std::vector<EvalRow> rows;
  /// (feature method, k) -> selected term set per fold.
  std::map<std::pair<std::string, std::size_t>, std::vector<std::set<std::string>>> selections;

  const EvalRow* pooled(std::string_view method, std::size_t k, FeatureWeighting w, ModelKind m) const;
};

/// k-fold evaluation; selection and df statistics come from training folds only.
EvalReport cross_validate(const corpus::Corpus& corpus, const corpus::FoldAssignment& folds,
                          const std::vector<FeatureSource>& sources, const CvOptions& options);

}  // namespace attnsel::classify
