#pragma once

// Model selection harness: metrics, fold splitting, cross-validation, grid
// search, the equal-weighting comparison and final pipeline fitting.

#include <sbt/features.hpp>
#include <sbt/models.hpp>
#include <sbt/sentiment.hpp>

#include <array>
#include <cstdint>
#include <functional>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <vector>

namespace sbt::corpus {
struct FeatureDataset;
}

namespace sbt::selection {

using features::FeatureMatrix;

// ------------------------------------------------------------------ metrics

// Rows are true classes, columns predicted classes.
struct ConfusionMatrix {
  std::array<std::array<std::size_t, kNumClasses>, kNumClasses> counts{};

  std::size_t at(SentimentClass truth, SentimentClass predicted) const {
    return counts[static_cast<std::size_t>(index_of(truth))][static_cast<std::size_t>(index_of(predicted))];
  }
  std::size_t total() const;
  ConfusionMatrix& operator+=(const ConfusionMatrix& other);
  friend bool operator==(const ConfusionMatrix&, const ConfusionMatrix&) = default;
};

ConfusionMatrix confusion(std::span<const SentimentClass> y_true, std::span<const SentimentClass> y_pred);

// TP / (TP + FP): column-wise, the share of predictions of class c that are
// correct. 0 when the class is never predicted.
double selection_score(const ConfusionMatrix& cm, SentimentClass c);

// TP / (TP + FN): row-wise. 0 when the class never occurs.
double standard_recall(const ConfusionMatrix& cm, SentimentClass c);

enum class Metric { SelectionScore, StandardRecall };

std::string_view to_string(Metric m);
std::optional<Metric> parse_metric(std::string_view text);

using ClassScores = std::array<double, kNumClasses>;

ClassScores class_scores(const ConfusionMatrix& cm, Metric metric);

// Mean of the Negative and Positive entries.
double polar_mean(const ClassScores& scores);

// ------------------------------------------------------------------- folds

using Fold = std::vector<std::size_t>;

// Seeded shuffle of 0..n-1 cut into k contiguous folds whose sizes differ by
// at most one.
std::vector<Fold> kfold_split(std::size_t n, std::size_t k, std::uint64_t seed);

// Each class is shuffled and dealt round-robin, continuing the rotation
// across classes, so per-fold class counts are within one of proportional.
std::vector<Fold> stratified_kfold(std::span<const SentimentClass> labels, std::size_t k, std::uint64_t seed);

// ---------------------------------------------------------------- pipelines

enum class Vectorizer { UnigramBigram, UnigramOnly };

std::string_view to_string(Vectorizer v);
std::optional<Vectorizer> parse_vectorizer(std::string_view text);
features::NgramRange ngram_range(Vectorizer v);

struct PipelineSpec {
  Variant dataset_variant = Variant::Title;
  Vectorizer vectorizer = Vectorizer::UnigramBigram;
  std::optional<std::size_t> svd_k;  // present iff SVD reduction is applied
  models::ModelSpec model;

  bool use_svd() const { return svd_k.has_value(); }
  friend bool operator==(const PipelineSpec&, const PipelineSpec&) = default;
};

// "TF-IDF Bigrams + SVD" style label.
std::string describe_preprocessing(const PipelineSpec& spec);

// Fitted preprocessing chain plus classifier.
struct Pipeline {
  PipelineSpec spec;
  features::TfidfTransform tfidf;
  std::optional<features::SvdTransform> svd;
  models::TrainedModel model;

  FeatureMatrix transform(std::span<const std::string> texts) const;
  std::vector<SentimentClass> predict(std::span<const std::string> texts) const;
};

struct LabeledData {
  std::vector<std::string> sample_ids;
  std::vector<std::string> texts;
  std::vector<SentimentClass> labels;

  std::size_t size() const { return labels.size(); }
};

// Rows of the dataset that carry a label, in dataset order.
LabeledData labeled_rows(const corpus::FeatureDataset& dataset);

// Fits TF-IDF (and SVD) then the model on all given rows.
Pipeline fit_pipeline(const PipelineSpec& spec, std::span<const std::string> texts,
                      std::span<const SentimentClass> labels);

Pipeline train_final(const PipelineSpec& spec, const LabeledData& data);

// ------------------------------------------------------- cross-validation

struct FoldScore {
  ConfusionMatrix confusion;
  ClassScores selection{};
  ClassScores recall{};
};

struct ScoreReport {
  Metric metric = Metric::SelectionScore;
  ClassScores selection{};  // per-class mean over folds
  ClassScores recall{};     // per-class mean over folds
  std::vector<FoldScore> folds;

  const ClassScores& primary() const { return metric == Metric::SelectionScore ? selection : recall; }
  double objective() const { return polar_mean(primary()); }
};

// Called once per fold with the pipeline fitted on that fold's training rows.
using FoldObserver =
    std::function<void(std::size_t fold, const Pipeline& pipeline, std::span<const std::size_t> held_out)>;

struct CvOptions {
  std::size_t folds = 10;
  std::uint64_t seed = 0;
  Metric metric = Metric::SelectionScore;
  bool stratified = false;
  unsigned jobs = 1;
  FoldObserver observer;
};

// Per fold: fit preprocessing and model on the training rows only, score the
// held-out rows. Training errors are rethrown annotated with the fold index.
ScoreReport cross_validate(const PipelineSpec& spec, const LabeledData& data, const CvOptions& options);

// ------------------------------------------------------------ grid search

struct GridDefinition {
  std::vector<double> logreg_c;
  std::vector<double> nb_alpha;
  std::vector<double> svm_c;
  std::vector<double> svm_gamma;
  std::vector<std::size_t> kmeans_n;

  static GridDefinition defaults();
  // Every hyperparameter setting for one family, in enumeration order.
  std::vector<models::Hyperparameters> points(models::Family family) const;
};

// One preprocessing column of the hyperparameter / score tables.
struct Preprocessing {
  Vectorizer vectorizer = Vectorizer::UnigramBigram;
  bool use_svd = false;
};

// "features_1", "features_2", "svd_features_1", "svd_features_2" in order;
// which vectorizer is "1" is configurable.
std::vector<Preprocessing> table_columns(Vectorizer features_1);
std::string column_name(const Preprocessing& p, Vectorizer features_1);

struct GridOptions {
  std::size_t folds = 10;
  std::uint64_t seed = 0;
  Metric metric = Metric::SelectionScore;
  std::size_t svd_k = features::kDefaultSvdDims;
  unsigned jobs = 1;
  std::vector<models::Family> families{models::kAllFamilies.begin(), models::kAllFamilies.end()};
  std::vector<Preprocessing> preprocessings = table_columns(Vectorizer::UnigramBigram);
};

struct GridPointResult {
  PipelineSpec spec;
  ScoreReport report;
};

struct CellResult {
  Variant variant = Variant::Title;
  models::Family family = models::Family::LogReg;
  Preprocessing preprocessing;
  std::optional<GridPointResult> best;  // absent when the family cannot run on this preprocessing
  std::string unavailable_reason;
  std::vector<GridPointResult> evaluated;
};

// Orders candidates: higher objective first, then fewer SVD dims, then
// smaller hyperparameters. Returns true when `a` beats `b`.
bool better_candidate(const GridPointResult& a, const GridPointResult& b);

// Evaluates every grid point of every (family, preprocessing) cell by
// cross-validation and keeps the best per cell. A NonNegativeRequired
// failure marks the cell unavailable (multinomial NB on SVD features);
// all other errors propagate.
std::vector<CellResult> grid_search(const LabeledData& data, Variant variant, const GridDefinition& grid,
                                    const GridOptions& options);

// ------------------------------------------------- equal-weighting check

struct WeightingComparison {
  models::ClassWeighting chosen = models::ClassWeighting::None;
  ScoreReport unweighted;
  ScoreReport weighted;
};

inline constexpr std::size_t kWeightingFolds = 3;

// Stratified 3-fold comparison of the pipeline with and without EqualClass
// weighting; ties keep the unweighted model.
WeightingComparison compare_equal_weighting(const PipelineSpec& spec, const LabeledData& data,
                                            std::uint64_t seed, Metric metric = Metric::SelectionScore,
                                            unsigned jobs = 1);

// ------------------------------------------------------------ report tables

void write_hyperparameter_table(std::ostream& out, std::span<const CellResult> cells, Vectorizer features_1);
void write_score_table(std::ostream& out, std::span<const CellResult> cells, Vectorizer features_1,
                       Metric metric);

}  // namespace sbt::selection
