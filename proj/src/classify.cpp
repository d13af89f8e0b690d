#include "attnsel/classify.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "attnsel/common.hpp"
#include "attnsel/parallel.hpp"

namespace attnsel::classify {

std::string_view to_string(FeatureWeighting w) {
  switch (w) {
    case FeatureWeighting::Binary: return "binary";
    case FeatureWeighting::Tf: return "tf";
    case FeatureWeighting::TfIdf: return "tfidf";
  }
  return "?";
}

FeatureWeighting parse_feature_weighting(std::string_view s) {
  if (s == "binary") return FeatureWeighting::Binary;
  if (s == "tf") return FeatureWeighting::Tf;
  if (s == "tfidf") return FeatureWeighting::TfIdf;
  config_error("unknown feature weighting '" + std::string(s) + "'");
}

std::string_view to_string(ModelKind k) {
  return k == ModelKind::NaiveBayes ? "nb" : "lr";
}

ModelKind parse_model_kind(std::string_view s) {
  if (s == "nb" || s == "naive-bayes") return ModelKind::NaiveBayes;
  if (s == "lr" || s == "logreg" || s == "logistic-regression") return ModelKind::LogisticRegression;
  config_error("unknown model kind '" + std::string(s) + "'");
}

// ---- features -------------------------------------------------------------

FeatureSpace::FeatureSpace(std::vector<std::string> terms, FeatureWeighting weighting)
    : terms_(std::move(terms)), weighting_(weighting) {
  for (std::size_t i = 0; i < terms_.size(); ++i) {
    if (!index_.emplace(terms_[i], i).second) data_error("feature space: duplicate term '" + terms_[i] + "'");
  }
}

FeatureSpace FeatureSpace::from_ranking(const featsel::TermRanking& ranking, std::size_t k,
                                        FeatureWeighting weighting) {
  return FeatureSpace(ranking.top(k), weighting);
}

long FeatureSpace::index_of(std::string_view term) const {
  auto it = index_.find(std::string(term));
  return it == index_.end() ? -1 : static_cast<long>(it->second);
}

CorpusStats CorpusStats::from(const corpus::Vocabulary& vocab, const FeatureSpace& space) {
  CorpusStats s;
  s.num_documents = vocab.num_documents();
  s.df.reserve(space.size());
  for (const auto& t : space.terms()) s.df.push_back(vocab.presence(t).size());
  return s;
}

SparseVector vectorize(const std::map<std::string, std::uint32_t, std::less<>>& term_counts,
                       const FeatureSpace& space, const CorpusStats& stats) {
  SparseVector v;
  v.dim = space.size();
  for (const auto& [term, count] : term_counts) {
    const long col = space.index_of(term);
    if (col < 0 || count == 0) continue;
    double value = 1.0;
    switch (space.weighting()) {
      case FeatureWeighting::Binary: break;
      case FeatureWeighting::Tf: value = count; break;
      case FeatureWeighting::TfIdf: {
        const auto df = stats.df.at(static_cast<std::size_t>(col));
        value = df == 0 ? 0.0
                        : count * std::log(static_cast<double>(stats.num_documents) / static_cast<double>(df));
        break;
      }
    }
    if (value != 0.0) v.entries.emplace_back(static_cast<std::uint32_t>(col), value);
  }
  std::sort(v.entries.begin(), v.entries.end());
  return v;
}

SparseVector vectorize(const corpus::Document& doc, const FeatureSpace& space, const CorpusStats& stats,
                       const corpus::TokenizationPolicy& policy) {
  std::map<std::string, std::uint32_t, std::less<>> counts;
  for (auto& t : corpus::tokenize(doc.text(), policy)) ++counts[std::move(t)];
  return vectorize(counts, space, stats);
}

// ---- models ---------------------------------------------------------------

namespace {

double sigmoid(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

// log(1 + e^z) without overflow.
double softplus(double z) { return z > 0.0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z)); }

double dot(const SparseVector& x, std::span<const double> w) {
  double s = 0.0;
  for (const auto& [j, v] : x.entries) s += w[j] * v;
  return s;
}

std::vector<int> targets_for(const LabelSets& labels, const std::string& category) {
  std::vector<int> y(labels.size());
  for (std::size_t i = 0; i < labels.size(); ++i) {
    y[i] = std::find(labels[i].begin(), labels[i].end(), category) != labels[i].end() ? 1 : 0;
  }
  return y;
}

void check_training_set(std::span<const SparseVector> docs, const LabelSets& labels) {
  if (docs.empty()) data_error("empty training set");
  if (labels.size() != docs.size()) data_error("training labels do not align with documents");
  for (const auto& d : docs) {
    if (d.dim != docs.front().dim) data_error("training vectors have inconsistent dimensions");
  }
}

}  // namespace

LinearModel train_nb(std::span<const SparseVector> docs, const LabelSets& labels,
                     const std::vector<std::string>& categories, double alpha) {
  if (!(alpha > 0.0)) config_error("naive Bayes smoothing alpha must be > 0");
  check_training_set(docs, labels);
  const std::size_t dim = docs.front().dim;
  LinearModel m;
  m.kind = ModelKind::NaiveBayes;
  m.dim = dim;
  m.categories = categories;
  for (const auto& cat : categories) {
    const auto y = targets_for(labels, cat);
    std::vector<double> pos(dim, 0.0), neg(dim, 0.0);
    double pos_total = 0.0, neg_total = 0.0;
    std::size_t n_pos = 0, n_neg = 0;
    for (std::size_t i = 0; i < docs.size(); ++i) {
      auto& counts = y[i] ? pos : neg;
      double& total = y[i] ? pos_total : neg_total;
      (y[i] ? n_pos : n_neg)++;
      for (const auto& [j, v] : docs[i].entries) {
        counts[j] += v;
        total += v;
      }
    }
    std::vector<double> w(dim, 0.0);
    double b = 0.0;
    if (n_pos == 0 || n_neg == 0) {
      b = std::log((static_cast<double>(n_pos) + alpha) / (static_cast<double>(n_neg) + alpha));
    } else {
      const double vocab = static_cast<double>(dim);
      const double log_pos_norm = std::log(pos_total + alpha * vocab);
      const double log_neg_norm = std::log(neg_total + alpha * vocab);
      for (std::size_t j = 0; j < dim; ++j) {
        w[j] = (std::log(pos[j] + alpha) - log_pos_norm) - (std::log(neg[j] + alpha) - log_neg_norm);
      }
      b = std::log(static_cast<double>(n_pos) / static_cast<double>(n_neg));
    }
    m.weights.push_back(std::move(w));
    m.bias.push_back(b);
  }
  return m;
}

LossAndGradient logreg_objective(std::span<const SparseVector> docs, std::span<const int> targets,
                                 std::span<const double> params, double l2) {
  if (docs.empty()) data_error("empty training set");
  const std::size_t dim = params.size() - 1;
  const auto w = params.first(dim);
  const double b = params[dim];
  LossAndGradient out;
  out.gradient.assign(params.size(), 0.0);
  const double inv_n = 1.0 / static_cast<double>(docs.size());
  for (std::size_t i = 0; i < docs.size(); ++i) {
    const double z = dot(docs[i], w) + b;
    out.loss += (softplus(z) - targets[i] * z) * inv_n;
    const double r = (sigmoid(z) - targets[i]) * inv_n;
    for (const auto& [j, v] : docs[i].entries) out.gradient[j] += r * v;
    out.gradient[dim] += r;
  }
  for (std::size_t j = 0; j < dim; ++j) {
    out.loss += 0.5 * l2 * w[j] * w[j];
    out.gradient[j] += l2 * w[j];
  }
  return out;
}

BinaryFit fit_logreg_binary(std::span<const SparseVector> docs, std::span<const int> targets, std::size_t dim,
                            const LogRegParams& params, std::uint64_t stream) {
  if (params.l2 < 0.0) config_error("logistic regression l2 must be >= 0");
  if (!(params.step > 0.0)) config_error("logistic regression step must be > 0");
  // Small seeded initial weights; mt19937_64 output is portable.
  std::mt19937_64 rng(params.seed ^ (0x9E3779B97F4A7C15ULL * (stream + 1)));
  std::vector<double> theta(dim + 1, 0.0);
  for (std::size_t j = 0; j < dim; ++j) {
    const double u = static_cast<double>(rng() >> 11) * 0x1.0p-53;
    theta[j] = (u - 0.5) * 0.02;
  }
  BinaryFit fit;
  for (int epoch = 0; epoch <= params.epochs; ++epoch) {
    const auto lg = logreg_objective(docs, targets, theta, params.l2);
    if (!std::isfinite(lg.loss)) data_error("logistic regression: non-finite loss (diverged step size)");
    fit.loss_history.push_back(lg.loss);
    if (epoch == params.epochs) break;
    for (std::size_t j = 0; j < theta.size(); ++j) theta[j] -= params.step * lg.gradient[j];
  }
  fit.bias = theta[dim];
  theta.pop_back();
  fit.weights = std::move(theta);
  return fit;
}

LinearModel train_logreg(std::span<const SparseVector> docs, const LabelSets& labels,
                         const std::vector<std::string>& categories, const LogRegParams& params) {
  check_training_set(docs, labels);
  LinearModel m;
  m.kind = ModelKind::LogisticRegression;
  m.dim = docs.front().dim;
  m.categories = categories;
  for (std::size_t c = 0; c < categories.size(); ++c) {
    const auto y = targets_for(labels, categories[c]);
    auto fit = fit_logreg_binary(docs, y, m.dim, params, c);
    m.weights.push_back(std::move(fit.weights));
    m.bias.push_back(fit.bias);
  }
  return m;
}

std::vector<double> predict(const LinearModel& model, const SparseVector& x) {
  if (x.dim != model.dim) {
    data_error("predict: dimension mismatch (vector " + std::to_string(x.dim) + ", model " +
               std::to_string(model.dim) + ")");
  }
  std::vector<double> out;
  out.reserve(model.categories.size());
  for (std::size_t c = 0; c < model.categories.size(); ++c) {
    out.push_back(sigmoid(dot(x, model.weights[c]) + model.bias[c]));
  }
  return out;
}

// ---- evaluation -------------------------------------------------------------

Metrics score(const std::vector<Confusion>& per_category) {
  Confusion total;
  double macro = 0.0;
  std::size_t counted = 0;
  auto f1_of = [](const Confusion& c) {
    const double p = c.tp + c.fp ? static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fp) : 0.0;
    const double r = c.tp + c.fn ? static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fn) : 0.0;
    return std::tuple{p, r, p + r > 0.0 ? 2.0 * p * r / (p + r) : 0.0};
  };
  for (const auto& c : per_category) {
    total += c;
    if (c.tp + c.fp + c.fn > 0) {
      macro += std::get<2>(f1_of(c));
      ++counted;
    }
  }
  Metrics m;
  std::tie(m.precision, m.recall, m.f1) = f1_of(total);
  m.macro_f1 = counted ? macro / static_cast<double>(counted) : 0.0;
  return m;
}

const EvalRow* EvalReport::pooled(std::string_view method, std::size_t k, FeatureWeighting w, ModelKind m) const {
  for (const auto& r : rows) {
    if (r.fold == -1 && r.feature_method == method && r.k == k && r.weighting == w && r.model == m) return &r;
  }
  return nullptr;
}

EvalReport cross_validate(const corpus::Corpus& corpus, const corpus::FoldAssignment& folds,
                          const std::vector<FeatureSource>& sources, const CvOptions& options) {
  if (folds.assignment().size() != corpus.size()) data_error("fold assignment does not cover the corpus");
  if (options.k_grid.empty() || options.weightings.empty() || options.models.empty()) {
    config_error("cross_validate: k grid, weightings and models must be non-empty");
  }
  const int k_folds = folds.k();
  for (int f = 0; f < k_folds; ++f) {
    if (folds.test_indices(f).empty()) data_error("fold " + std::to_string(f) + " is empty");
  }
  const auto categories = corpus.taxonomy().codes_at_level(options.level);
  const corpus::Vocabulary full_vocab(corpus, options.policy);
  LabelSets all_labels(corpus.size());
  for (std::size_t i = 0; i < corpus.size(); ++i) all_labels[i] = corpus.labels(i, options.level);

  const std::size_t nk = options.k_grid.size(), nw = options.weightings.size(), nm = options.models.size();
  const std::size_t configs = sources.size() * nk * nw * nm;
  auto slot = [&](std::size_t s, std::size_t ki, std::size_t wi, std::size_t mi) {
    return ((s * nk + ki) * nw + wi) * nm + mi;
  };
  // results[fold][config] -> per-category confusion
  std::vector<std::vector<std::vector<Confusion>>> results(
      static_cast<std::size_t>(k_folds), std::vector<std::vector<Confusion>>(configs));
  std::vector<std::vector<std::vector<std::set<std::string>>>> selected(
      static_cast<std::size_t>(k_folds), std::vector<std::vector<std::set<std::string>>>(sources.size()));

  parallel_for(static_cast<std::size_t>(k_folds), options.jobs, [&](std::size_t f) {
    const auto train_idx = folds.train_indices(static_cast<int>(f));
    const auto test_idx = folds.test_indices(static_cast<int>(f));
    const corpus::Corpus train = corpus.subset(train_idx);
    const corpus::Vocabulary train_vocab(train, options.policy);
    LabelSets train_labels;
    for (auto i : train_idx) train_labels.push_back(all_labels[i]);

    for (std::size_t s = 0; s < sources.size(); ++s) {
      const featsel::TermRanking ranking = sources[s].rank(train, train_vocab, train_idx);
      selected[f][s].resize(nk);
      for (std::size_t ki = 0; ki < nk; ++ki) {
        const auto top = ranking.top(options.k_grid[ki]);
        selected[f][s][ki] = {top.begin(), top.end()};
        for (std::size_t wi = 0; wi < nw; ++wi) {
          const FeatureSpace space(top, options.weightings[wi]);
          const auto stats = CorpusStats::from(train_vocab, space);
          std::vector<SparseVector> x_train, x_test;
          for (auto i : train_idx) x_train.push_back(vectorize(full_vocab.counts(i), space, stats));
          for (auto i : test_idx) x_test.push_back(vectorize(full_vocab.counts(i), space, stats));
          for (std::size_t mi = 0; mi < nm; ++mi) {
            const LinearModel model =
                options.models[mi] == ModelKind::NaiveBayes
                    ? train_nb(x_train, train_labels, categories, options.nb_alpha)
                    : train_logreg(x_train, train_labels, categories, options.logreg);
            std::vector<Confusion> conf(categories.size());
            for (std::size_t t = 0; t < test_idx.size(); ++t) {
              const auto probs = predict(model, x_test[t]);
              const auto& truth = all_labels[test_idx[t]];
              for (std::size_t c = 0; c < categories.size(); ++c) {
                const bool actual = std::binary_search(truth.begin(), truth.end(), categories[c]);
                const bool guess = probs[c] >= kDecisionThreshold;
                auto& cc = conf[c];
                (actual ? (guess ? cc.tp : cc.fn) : (guess ? cc.fp : cc.tn))++;
              }
            }
            results[f][slot(s, ki, wi, mi)] = std::move(conf);
          }
        }
      }
    }
  });

  EvalReport report;
  for (std::size_t s = 0; s < sources.size(); ++s) {
    for (std::size_t ki = 0; ki < nk; ++ki) {
      auto& sel = report.selections[{sources[s].name, options.k_grid[ki]}];
      for (int f = 0; f < k_folds; ++f) sel.push_back(selected[static_cast<std::size_t>(f)][s][ki]);
      for (std::size_t wi = 0; wi < nw; ++wi) {
        for (std::size_t mi = 0; mi < nm; ++mi) {
          std::vector<Confusion> pooled(categories.size());
          for (int f = 0; f < k_folds; ++f) {
            const auto& conf = results[static_cast<std::size_t>(f)][slot(s, ki, wi, mi)];
            for (std::size_t c = 0; c < categories.size(); ++c) pooled[c] += conf[c];
            report.rows.push_back({sources[s].name, options.k_grid[ki], options.weightings[wi], options.models[mi], f,
                                   score(conf)});
          }
          report.rows.push_back(
              {sources[s].name, options.k_grid[ki], options.weightings[wi], options.models[mi], -1, score(pooled)});
        }
      }
    }
  }
  return report;
}

}  // namespace attnsel::classify
