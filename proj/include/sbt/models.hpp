#pragma once

// The four classifier families behind one train/predict contract.

#include <sbt/features.hpp>
#include <sbt/sentiment.hpp>

#include <Eigen/Dense>

#include <array>
#include <cstdint>
#include <span>
#include <string_view>
#include <variant>
#include <vector>

namespace sbt::models {

using features::FeatureMatrix;

enum class Family { LogReg, MultinomialNB, RbfSvm, KMeans };
enum class ClassWeighting { None, EqualClass };

inline constexpr std::array<Family, 4> kAllFamilies{Family::LogReg, Family::MultinomialNB,
                                                    Family::RbfSvm, Family::KMeans};

std::string_view to_string(Family f);
std::string_view to_string(ClassWeighting w);

struct LogRegParams {
  double c = 1.0;
  friend bool operator==(const LogRegParams&, const LogRegParams&) = default;
};
struct NaiveBayesParams {
  double alpha = 1.0;
  friend bool operator==(const NaiveBayesParams&, const NaiveBayesParams&) = default;
};
struct SvmParams {
  double c = 1.0;
  double gamma = 1.0;
  friend bool operator==(const SvmParams&, const SvmParams&) = default;
};
struct KMeansParams {
  std::size_t n_clusters = 3;
  friend bool operator==(const KMeansParams&, const KMeansParams&) = default;
};

using Hyperparameters = std::variant<LogRegParams, NaiveBayesParams, SvmParams, KMeansParams>;

struct ModelSpec {
  Hyperparameters params;
  ClassWeighting class_weighting = ClassWeighting::None;
  std::uint64_t seed = 0;

  Family family() const { return static_cast<Family>(params.index()); }
  friend bool operator==(const ModelSpec&, const ModelSpec&) = default;
};

// Human-readable hyperparameters, e.g. "C: 100 y: 0.01".
std::string describe(const Hyperparameters& params);

using SampleWeights = std::vector<double>;

// n / (K_present * n_c) for each sample of class c.
SampleWeights equal_class_weights(std::span<const SentimentClass> labels);

// ---------------------------------------------------------------- parameters

struct LogRegModel {
  Eigen::MatrixXd weights;  // 3 x d
  Eigen::VectorXd bias;     // 3; -inf for classes absent from training
};

struct NaiveBayesModel {
  Eigen::VectorXd log_prior;       // 3; -inf for absent classes
  Eigen::MatrixXd log_likelihood;  // 3 x d
};

// One binary one-vs-rest machine: f(x) = sum_i alpha_i y_i k(sv_i, x) + intercept.
struct SvmBinary {
  bool trained = false;            // false when the class was absent from training
  Eigen::MatrixXd support_vectors;  // n_sv x d
  Eigen::VectorXd alpha;           // dual coefficients, 0 < alpha_i <= upper_bound_i
  Eigen::VectorXd sign;            // +1 / -1 labels of the support vectors
  Eigen::VectorXd upper_bound;     // C * weight_i
  double intercept = 0.0;
  double kkt_residual = 0.0;
};

struct SvmModel {
  double gamma = 1.0;
  std::size_t input_dim = 0;
  std::array<SvmBinary, kNumClasses> machines;
};

struct KMeansModel {
  Eigen::MatrixXd centroids;                // n_clusters x d
  std::vector<SentimentClass> cluster_class;  // one per centroid
};

using ModelParameters = std::variant<LogRegModel, NaiveBayesModel, SvmModel, KMeansModel>;

struct TrainedModel {
  ModelSpec spec;
  ModelParameters parameters;

  std::size_t input_dim() const;
};

// ------------------------------------------------------- logistic regression

// Objective: weighted mean cross-entropy + ||W||_F^2 / (2C); bias unpenalized.
struct LogRegOptions {
  double gradient_tolerance = 1e-6;
  int max_iterations = 5000;
  int history = 10;  // L-BFGS memory
};

struct LogRegTrace {
  std::vector<double> objective;  // after each accepted step, starting at the initial point
  int iterations = 0;
  double gradient_inf_norm = 0.0;
};

// Objective and gradient over the present classes only. `classes` lists the
// class indices that own rows of `weights` / entries of `bias`.
double logreg_objective(const Eigen::MatrixXd& weights, const Eigen::VectorXd& bias,
                        std::span<const int> classes, const FeatureMatrix& x,
                        std::span<const SentimentClass> y, std::span<const double> w, double c,
                        Eigen::MatrixXd* grad_weights = nullptr, Eigen::VectorXd* grad_bias = nullptr);

TrainedModel train_logreg(const FeatureMatrix& x, std::span<const SentimentClass> y, double c,
                          std::span<const double> weights, const LogRegOptions& options = {},
                          LogRegTrace* trace = nullptr);

// --------------------------------------------------------------- naive Bayes

TrainedModel train_mnb(const FeatureMatrix& x, std::span<const SentimentClass> y, double alpha,
                       std::span<const double> weights = {});

// ----------------------------------------------------------------------- SVM

struct SvmOptions {
  double tolerance = 1e-3;         // maximal KKT violation at termination
  double max_updates_factor = 100; // cap = factor * n^2 pair updates
};

struct DualSolution {
  Eigen::VectorXd alpha;
  double intercept = 0.0;
  double kkt_residual = 0.0;
  std::size_t updates = 0;
};

// Solves min 1/2 a'Qa - sum(a), Q_ij = y_i y_j K_ij, 0 <= a_i <= upper_i,
// y'a = 0, by maximal-violating-pair SMO with second-order working-set
// selection. Throws NonConvergence once the update cap is reached.
DualSolution solve_svm_dual(const Eigen::MatrixXd& kernel, const Eigen::VectorXd& sign,
                            const Eigen::VectorXd& upper, const SvmOptions& options = {});

Eigen::MatrixXd rbf_kernel(const FeatureMatrix& a, const FeatureMatrix& b, double gamma);

TrainedModel train_rbf_svm(const FeatureMatrix& x, std::span<const SentimentClass> y, double c,
                           double gamma, std::span<const double> weights,
                           const SvmOptions& options = {});

// n x 3 decision values; -inf for classes without a machine.
Eigen::MatrixXd svm_decision_values(const SvmModel& model, const FeatureMatrix& x);

// ------------------------------------------------------------------- K-Means

inline constexpr int kKMeansMaxIterations = 300;

struct KMeansFit {
  Eigen::MatrixXd centroids;
  std::vector<std::size_t> assignment;
  std::vector<double> inertia;  // after each assignment step
  int iterations = 0;
};

// Lloyd iterations from a seeded farthest-point start: the first center is a
// seeded random row, each next one the row farthest from all chosen centers.
KMeansFit kmeans_fit(const FeatureMatrix& x, std::size_t n_clusters, std::uint64_t seed,
                     int max_iterations = kKMeansMaxIterations);

TrainedModel train_kmeans_classifier(const FeatureMatrix& x, std::span<const SentimentClass> y,
                                     std::size_t n_clusters, std::uint64_t seed);

// ------------------------------------------------------------------- generic

// Dispatches on spec.family(). EqualClass weighting becomes per-sample weights
// for LogReg / MultinomialNB / RbfSvm and a seeded subsample down to the
// smallest class for KMeans.
TrainedModel train(const ModelSpec& spec, const FeatureMatrix& x, std::span<const SentimentClass> y);

std::vector<SentimentClass> predict(const TrainedModel& model, const FeatureMatrix& x);

// Index of the largest entry of each row; ties go to the lower class index.
std::vector<SentimentClass> argmax_rows(const Eigen::MatrixXd& scores);

}  // namespace sbt::models
