#include <sbt/selection.hpp>

#include <sbt/corpus.hpp>
#include <sbt/csv.hpp>
#include <sbt/error.hpp>
#include <sbt/parallel.hpp>
#include <sbt/random.hpp>

#include <algorithm>
#include <numeric>
#include <tuple>

#include <fmt/format.h>

namespace sbt::selection {

// ------------------------------------------------------------------ metrics

std::size_t ConfusionMatrix::total() const {
  std::size_t t = 0;
  for (const auto& row : counts)
    for (auto v : row) t += v;
  return t;
}

ConfusionMatrix& ConfusionMatrix::operator+=(const ConfusionMatrix& other) {
  for (std::size_t i = 0; i < kNumClasses; ++i)
    for (std::size_t j = 0; j < kNumClasses; ++j) counts[i][j] += other.counts[i][j];
  return *this;
}

ConfusionMatrix confusion(std::span<const SentimentClass> y_true, std::span<const SentimentClass> y_pred) {
  if (y_true.size() != y_pred.size())
    throw Error(ErrorCode::LengthMismatch,
                fmt::format("{} true labels but {} predictions", y_true.size(), y_pred.size()));
  if (y_true.empty()) throw Error(ErrorCode::LengthMismatch, "confusion matrix of zero samples");
  ConfusionMatrix cm;
  for (std::size_t i = 0; i < y_true.size(); ++i)
    ++cm.counts[static_cast<std::size_t>(index_of(y_true[i]))][static_cast<std::size_t>(index_of(y_pred[i]))];
  return cm;
}

double selection_score(const ConfusionMatrix& cm, SentimentClass c) {
  const auto k = static_cast<std::size_t>(index_of(c));
  std::size_t predicted = 0;
  for (std::size_t t = 0; t < kNumClasses; ++t) predicted += cm.counts[t][k];
  return predicted == 0 ? 0.0 : static_cast<double>(cm.counts[k][k]) / static_cast<double>(predicted);
}

double standard_recall(const ConfusionMatrix& cm, SentimentClass c) {
  const auto k = static_cast<std::size_t>(index_of(c));
  std::size_t actual = 0;
  for (std::size_t p = 0; p < kNumClasses; ++p) actual += cm.counts[k][p];
  return actual == 0 ? 0.0 : static_cast<double>(cm.counts[k][k]) / static_cast<double>(actual);
}

std::string_view to_string(Metric m) {
  return m == Metric::SelectionScore ? "eq1" : "standard-recall";
}

std::optional<Metric> parse_metric(std::string_view text) {
  if (text == "eq1" || text == "selection" || text == "selection-score") return Metric::SelectionScore;
  if (text == "standard-recall" || text == "recall") return Metric::StandardRecall;
  return std::nullopt;
}

ClassScores class_scores(const ConfusionMatrix& cm, Metric metric) {
  ClassScores s{};
  for (auto c : kAllClasses)
    s[static_cast<std::size_t>(index_of(c))] =
        metric == Metric::SelectionScore ? selection_score(cm, c) : standard_recall(cm, c);
  return s;
}

double polar_mean(const ClassScores& scores) {
  return (scores[static_cast<std::size_t>(index_of(SentimentClass::Negative))] +
          scores[static_cast<std::size_t>(index_of(SentimentClass::Positive))]) /
         2.0;
}

// ------------------------------------------------------------------- folds

std::vector<Fold> kfold_split(std::size_t n, std::size_t k, std::uint64_t seed) {
  if (k == 0) throw Error(ErrorCode::InvalidArgument, "need at least one fold");
  if (k > n) throw Error(ErrorCode::TooManyFolds, fmt::format("{} folds requested for {} samples", k, n));
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  Rng rng(seed);
  rng.shuffle(std::span<std::size_t>(order));

  std::vector<Fold> folds(k);
  std::size_t pos = 0;
  for (std::size_t f = 0; f < k; ++f) {
    const std::size_t size = n / k + (f < n % k ? 1 : 0);
    folds[f].assign(order.begin() + static_cast<std::ptrdiff_t>(pos),
                    order.begin() + static_cast<std::ptrdiff_t>(pos + size));
    std::sort(folds[f].begin(), folds[f].end());
    pos += size;
  }
  return folds;
}

std::vector<Fold> stratified_kfold(std::span<const SentimentClass> labels, std::size_t k, std::uint64_t seed) {
  if (k == 0) throw Error(ErrorCode::InvalidArgument, "need at least one fold");
  std::array<std::vector<std::size_t>, kNumClasses> by_class;
  for (std::size_t i = 0; i < labels.size(); ++i)
    by_class[static_cast<std::size_t>(index_of(labels[i]))].push_back(i);
  for (std::size_t c = 0; c < kNumClasses; ++c)
    if (!by_class[c].empty() && by_class[c].size() < k)
      throw Error(ErrorCode::ClassTooSmall,
                  fmt::format("class {} has {} samples, fewer than {} folds",
                              to_string(class_at(static_cast<int>(c))), by_class[c].size(), k));
  if (labels.size() < k)
    throw Error(ErrorCode::TooManyFolds, fmt::format("{} folds requested for {} samples", k, labels.size()));

  Rng rng(seed);
  std::vector<Fold> folds(k);
  std::size_t next = 0;
  for (auto& members : by_class) {
    rng.shuffle(std::span<std::size_t>(members));
    for (auto idx : members) {
      folds[next].push_back(idx);
      next = (next + 1) % k;
    }
  }
  for (auto& f : folds) std::sort(f.begin(), f.end());
  return folds;
}

// ---------------------------------------------------------------- pipelines

std::string_view to_string(Vectorizer v) {
  return v == Vectorizer::UnigramBigram ? "unigram_bigram" : "unigram";
}

std::optional<Vectorizer> parse_vectorizer(std::string_view text) {
  if (text == "unigram_bigram" || text == "bigram" || text == "bigrams") return Vectorizer::UnigramBigram;
  if (text == "unigram" || text == "unigram_only") return Vectorizer::UnigramOnly;
  return std::nullopt;
}

features::NgramRange ngram_range(Vectorizer v) {
  return v == Vectorizer::UnigramBigram ? features::NgramRange::UnigramBigram : features::NgramRange::Unigram;
}

std::string describe_preprocessing(const PipelineSpec& spec) {
  std::string s = spec.vectorizer == Vectorizer::UnigramBigram ? "TF-IDF Bigrams" : "TF-IDF Unigrams";
  if (spec.use_svd()) s += fmt::format(" + SVD({})", *spec.svd_k);
  if (spec.model.class_weighting == models::ClassWeighting::EqualClass) s += " + Equal Weight";
  return s;
}

FeatureMatrix Pipeline::transform(std::span<const std::string> texts) const {
  FeatureMatrix x = features::apply_tfidf(tfidf, texts);
  if (svd) x = features::apply_svd(*svd, x);
  return x;
}

std::vector<SentimentClass> Pipeline::predict(std::span<const std::string> texts) const {
  return models::predict(model, transform(texts));
}

LabeledData labeled_rows(const corpus::FeatureDataset& dataset) {
  LabeledData data;
  for (const auto& row : dataset.rows) {
    if (!row.label) continue;
    data.sample_ids.push_back(row.sample_id);
    data.texts.push_back(row.text);
    data.labels.push_back(*row.label);
  }
  return data;
}

Pipeline fit_pipeline(const PipelineSpec& spec, std::span<const std::string> texts,
                      std::span<const SentimentClass> labels) {
  if (texts.size() != labels.size())
    throw Error(ErrorCode::LengthMismatch, fmt::format("{} texts but {} labels", texts.size(), labels.size()));
  Pipeline p;
  p.spec = spec;
  p.tfidf = features::fit_tfidf(texts, ngram_range(spec.vectorizer));
  FeatureMatrix x = features::apply_tfidf(p.tfidf, texts);
  if (spec.svd_k) {
    p.svd = features::fit_svd(x, *spec.svd_k);
    x = features::apply_svd(*p.svd, x);
  }
  p.model = models::train(spec.model, x, labels);
  return p;
}

Pipeline train_final(const PipelineSpec& spec, const LabeledData& data) {
  return fit_pipeline(spec, data.texts, data.labels);
}

// ------------------------------------------------------- cross-validation

namespace {

// Preprocessing fitted on one fold's training rows, with both splits
// transformed. Shared by every model evaluated on the fold.
struct PreparedFold {
  Fold held_out;
  features::TfidfTransform tfidf;
  std::optional<features::SvdTransform> svd;
  FeatureMatrix x_train;
  FeatureMatrix x_test;
  std::vector<SentimentClass> y_train;
  std::vector<SentimentClass> y_test;
};

PreparedFold prepare_fold(Vectorizer vectorizer, std::optional<std::size_t> svd_k, const LabeledData& data,
                          const Fold& held_out) {
  PreparedFold f;
  f.held_out = held_out;
  std::vector<bool> is_test(data.size(), false);
  for (auto i : held_out) is_test[i] = true;
  std::vector<std::string> train_texts, test_texts;
  for (std::size_t i = 0; i < data.size(); ++i) {
    if (is_test[i]) {
      test_texts.push_back(data.texts[i]);
      f.y_test.push_back(data.labels[i]);
    } else {
      train_texts.push_back(data.texts[i]);
      f.y_train.push_back(data.labels[i]);
    }
  }
  f.tfidf = features::fit_tfidf(train_texts, ngram_range(vectorizer));
  f.x_train = features::apply_tfidf(f.tfidf, train_texts);
  f.x_test = features::apply_tfidf(f.tfidf, test_texts);
  if (svd_k) {
    f.svd = features::fit_svd(f.x_train, *svd_k);
    f.x_train = features::apply_svd(*f.svd, f.x_train);
    f.x_test = features::apply_svd(*f.svd, f.x_test);
  }
  return f;
}

Error annotate(const Error& e, std::size_t fold) {
  return Error(e.code(), fmt::format("fold {}: {}", fold, e.message()));
}

std::vector<Fold> make_folds(const LabeledData& data, std::size_t k, std::uint64_t seed, bool stratified) {
  return stratified ? stratified_kfold(data.labels, k, seed) : kfold_split(data.size(), k, seed);
}

FoldScore score_fold(const models::TrainedModel& model, const PreparedFold& f) {
  FoldScore s;
  s.confusion = confusion(f.y_test, models::predict(model, f.x_test));
  s.selection = class_scores(s.confusion, Metric::SelectionScore);
  s.recall = class_scores(s.confusion, Metric::StandardRecall);
  return s;
}

ScoreReport reduce(std::vector<FoldScore> folds, Metric metric) {
  ScoreReport r;
  r.metric = metric;
  for (const auto& f : folds)
    for (std::size_t c = 0; c < kNumClasses; ++c) {
      r.selection[c] += f.selection[c];
      r.recall[c] += f.recall[c];
    }
  const auto n = static_cast<double>(folds.size());
  for (std::size_t c = 0; c < kNumClasses; ++c) {
    r.selection[c] /= n;
    r.recall[c] /= n;
  }
  r.folds = std::move(folds);
  return r;
}

std::tuple<std::size_t, double, double> complexity_key(const PipelineSpec& spec) {
  struct Visitor {
    std::pair<double, double> operator()(const models::LogRegParams& p) const { return {p.c, 0.0}; }
    std::pair<double, double> operator()(const models::NaiveBayesParams& p) const { return {p.alpha, 0.0}; }
    std::pair<double, double> operator()(const models::SvmParams& p) const { return {p.c, p.gamma}; }
    std::pair<double, double> operator()(const models::KMeansParams& p) const {
      return {static_cast<double>(p.n_clusters), 0.0};
    }
  };
  auto [a, b] = std::visit(Visitor{}, spec.model.params);
  return {spec.svd_k.value_or(0), a, b};
}

}  // namespace

ScoreReport cross_validate(const PipelineSpec& spec, const LabeledData& data, const CvOptions& options) {
  const auto folds = make_folds(data, options.folds, options.seed, options.stratified);
  std::vector<FoldScore> scores(folds.size());
  parallel_for(folds.size(), options.jobs, [&](std::size_t f) {
    try {
      PreparedFold prepared = prepare_fold(spec.vectorizer, spec.svd_k, data, folds[f]);
      models::TrainedModel model = models::train(spec.model, prepared.x_train, prepared.y_train);
      scores[f] = score_fold(model, prepared);
      if (options.observer) {
        Pipeline p{spec, std::move(prepared.tfidf), std::move(prepared.svd), std::move(model)};
        options.observer(f, p, folds[f]);
      }
    } catch (const Error& e) {
      throw annotate(e, f);
    }
  });
  return reduce(std::move(scores), options.metric);
}

// ------------------------------------------------------------ grid search

GridDefinition GridDefinition::defaults() {
  GridDefinition g;
  g.logreg_c = {1e-5, 1e-4, 1e-3, 0.01, 0.1, 1, 10, 100};
  g.nb_alpha = {0.01, 0.1, 1, 10, 100};
  g.svm_c = {1e-5, 1e-4, 1e-3, 0.01, 0.1, 1, 10, 100};
  g.svm_gamma = {1e-8, 1e-4, 0.01, 1, 10};
  g.kmeans_n = {3, 4, 5};
  return g;
}

std::vector<models::Hyperparameters> GridDefinition::points(models::Family family) const {
  std::vector<models::Hyperparameters> out;
  switch (family) {
    case models::Family::LogReg:
      for (double c : logreg_c) out.emplace_back(models::LogRegParams{c});
      break;
    case models::Family::MultinomialNB:
      for (double a : nb_alpha) out.emplace_back(models::NaiveBayesParams{a});
      break;
    case models::Family::RbfSvm:
      for (double c : svm_c)
        for (double g : svm_gamma) out.emplace_back(models::SvmParams{c, g});
      break;
    case models::Family::KMeans:
      for (auto n : kmeans_n) out.emplace_back(models::KMeansParams{n});
      break;
  }
  if (out.empty())
    throw Error(ErrorCode::InvalidArgument, fmt::format("empty grid for {}", models::to_string(family)));
  return out;
}

std::vector<Preprocessing> table_columns(Vectorizer features_1) {
  const Vectorizer features_2 =
      features_1 == Vectorizer::UnigramBigram ? Vectorizer::UnigramOnly : Vectorizer::UnigramBigram;
  return {{features_1, false}, {features_2, false}, {features_1, true}, {features_2, true}};
}

std::string column_name(const Preprocessing& p, Vectorizer features_1) {
  return fmt::format("{}features_{}", p.use_svd ? "svd_" : "", p.vectorizer == features_1 ? 1 : 2);
}

bool better_candidate(const GridPointResult& a, const GridPointResult& b) {
  const double oa = a.report.objective();
  const double ob = b.report.objective();
  if (oa != ob) return oa > ob;
  return complexity_key(a.spec) < complexity_key(b.spec);
}

std::vector<CellResult> grid_search(const LabeledData& data, Variant variant, const GridDefinition& grid,
                                    const GridOptions& options) {
  const auto folds = make_folds(data, options.folds, options.seed, false);
  std::vector<CellResult> cells;

  for (const auto& prep : options.preprocessings) {
    const std::optional<std::size_t> svd_k =
        prep.use_svd ? std::optional<std::size_t>(options.svd_k) : std::nullopt;
    std::vector<PreparedFold> prepared(folds.size());
    parallel_for(folds.size(), options.jobs, [&](std::size_t f) {
      try {
        prepared[f] = prepare_fold(prep.vectorizer, svd_k, data, folds[f]);
      } catch (const Error& e) {
        throw annotate(e, f);
      }
    });

    for (auto family : options.families) {
      CellResult cell;
      cell.variant = variant;
      cell.family = family;
      cell.preprocessing = prep;

      const auto points = grid.points(family);
      std::vector<PipelineSpec> specs;
      for (const auto& params : points) {
        PipelineSpec spec{variant, prep.vectorizer, svd_k, {params, models::ClassWeighting::None, options.seed}};
        specs.push_back(spec);
      }
      std::vector<FoldScore> scores(specs.size() * folds.size());
      try {
        parallel_for(scores.size(), options.jobs, [&](std::size_t job) {
          const std::size_t p = job / folds.size();
          const std::size_t f = job % folds.size();
          try {
            const auto model = models::train(specs[p].model, prepared[f].x_train, prepared[f].y_train);
            scores[job] = score_fold(model, prepared[f]);
          } catch (const Error& e) {
            throw annotate(e, f);
          }
        });
      } catch (const Error& e) {
        if (e.code() != ErrorCode::NonNegativeRequired) throw;
        cell.unavailable_reason = e.what();
        cells.push_back(std::move(cell));
        continue;
      }

      for (std::size_t p = 0; p < specs.size(); ++p) {
        std::vector<FoldScore> mine(scores.begin() + static_cast<std::ptrdiff_t>(p * folds.size()),
                                    scores.begin() + static_cast<std::ptrdiff_t>((p + 1) * folds.size()));
        GridPointResult r{specs[p], reduce(std::move(mine), options.metric)};
        if (!cell.best || better_candidate(r, *cell.best)) cell.best = r;
        cell.evaluated.push_back(std::move(r));
      }
      cells.push_back(std::move(cell));
    }
  }
  return cells;
}

// ------------------------------------------------- equal-weighting check

WeightingComparison compare_equal_weighting(const PipelineSpec& spec, const LabeledData& data,
                                            std::uint64_t seed, Metric metric, unsigned jobs) {
  CvOptions options;
  options.folds = kWeightingFolds;
  options.seed = seed;
  options.metric = metric;
  options.stratified = true;
  options.jobs = jobs;

  PipelineSpec plain = spec;
  plain.model.class_weighting = models::ClassWeighting::None;
  PipelineSpec weighted = spec;
  weighted.model.class_weighting = models::ClassWeighting::EqualClass;

  WeightingComparison out;
  out.unweighted = cross_validate(plain, data, options);
  out.weighted = cross_validate(weighted, data, options);
  out.chosen = out.weighted.objective() > out.unweighted.objective() ? models::ClassWeighting::EqualClass
                                                                     : models::ClassWeighting::None;
  return out;
}

// ------------------------------------------------------------ report tables

namespace {

std::string format_scores(const ClassScores& s) {
  return fmt::format("{:.4f}, {:.4f}, {:.4f}", s[0], s[1], s[2]);
}

// Cells grouped by (variant, family) in first-appearance order.
template <typename CellText>
void write_table(std::ostream& out, std::span<const CellResult> cells, Vectorizer features_1, CellText text) {
  const auto columns = table_columns(features_1);
  std::vector<std::string> header{"dataset", "model_class"};
  for (const auto& c : columns) header.push_back(column_name(c, features_1));
  csv::write_row(out, header);

  std::vector<std::pair<Variant, models::Family>> keys;
  for (const auto& c : cells)
    if (std::find(keys.begin(), keys.end(), std::pair{c.variant, c.family}) == keys.end())
      keys.emplace_back(c.variant, c.family);

  for (const auto& [variant, family] : keys) {
    std::vector<std::string> row{std::string(to_string(variant)), std::string(models::to_string(family))};
    for (const auto& col : columns) {
      auto it = std::find_if(cells.begin(), cells.end(), [&](const CellResult& c) {
        return c.variant == variant && c.family == family && c.preprocessing.vectorizer == col.vectorizer &&
               c.preprocessing.use_svd == col.use_svd;
      });
      row.push_back(it == cells.end() || !it->best ? std::string("n/a") : text(*it->best));
    }
    csv::write_row(out, row);
  }
}

}  // namespace

void write_hyperparameter_table(std::ostream& out, std::span<const CellResult> cells, Vectorizer features_1) {
  write_table(out, cells, features_1,
              [](const GridPointResult& r) { return models::describe(r.spec.model.params); });
}

void write_score_table(std::ostream& out, std::span<const CellResult> cells, Vectorizer features_1,
                       Metric metric) {
  write_table(out, cells, features_1, [metric](const GridPointResult& r) {
    return format_scores(metric == Metric::SelectionScore ? r.report.selection : r.report.recall);
  });
}

}  // namespace sbt::selection
