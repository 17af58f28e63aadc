#include <doctest.h>

#include "support/oracles.hpp"

#include <sbt/error.hpp>
#include <sbt/models.hpp>
#include <sbt/random.hpp>

#include <cmath>
#include <limits>
#include <numeric>

using namespace sbt;
using namespace sbt::models;

namespace {

constexpr auto Neg = SentimentClass::Negative;
constexpr auto Neu = SentimentClass::Neutral;
constexpr auto Pos = SentimentClass::Positive;

ErrorCode code_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected an sbt::Error");
  return ErrorCode::InvalidArgument;
}

struct Blobs {
  FeatureMatrix x;
  std::vector<SentimentClass> y;
};

// Three well-separated Gaussian blobs, one per class.
Blobs blobs(Rng& rng, std::size_t per_class, double spread, Eigen::Index dims = 2) {
  Blobs b;
  b.x.resize(static_cast<Eigen::Index>(3 * per_class), dims);
  Eigen::Index row = 0;
  for (int k = 0; k < kNumClasses; ++k) {
    Eigen::VectorXd center = Eigen::VectorXd::Zero(dims);
    center(k % dims) = 5.0;
    if (k == 2) center.setConstant(-5.0);
    for (std::size_t i = 0; i < per_class; ++i, ++row) {
      for (Eigen::Index d = 0; d < dims; ++d) b.x(row, d) = center(d) + spread * oracle::normal(rng);
      b.y.push_back(class_at(k));
    }
  }
  return b;
}

double accuracy(std::span<const SentimentClass> a, std::span<const SentimentClass> b) {
  std::size_t hit = 0;
  for (std::size_t i = 0; i < a.size(); ++i) hit += a[i] == b[i];
  return static_cast<double>(hit) / static_cast<double>(a.size());
}

std::vector<SentimentClass> random_labels(Rng& rng, std::size_t n) {
  std::vector<SentimentClass> y(n);
  for (auto& c : y) c = class_at(static_cast<int>(rng.below(3)));
  // Every class present.
  for (int k = 0; k < kNumClasses && static_cast<std::size_t>(k) < n; ++k) y[static_cast<std::size_t>(k)] = class_at(k);
  return y;
}

}  // namespace

TEST_CASE("equal class weights") {
  std::vector<SentimentClass> y;
  y.insert(y.end(), 20, Neg);
  y.insert(y.end(), 60, Neu);
  y.insert(y.end(), 20, Pos);
  const auto w = equal_class_weights(y);
  CHECK(w.front() == doctest::Approx(100.0 / 60.0).epsilon(1e-12));
  CHECK(w[20] == doctest::Approx(100.0 / 180.0).epsilon(1e-12));
  CHECK(w.back() == doctest::Approx(100.0 / 60.0).epsilon(1e-12));
  CHECK(std::accumulate(w.begin(), w.end(), 0.0) == doctest::Approx(100.0));

  // Only present classes count toward K.
  const std::vector<SentimentClass> two{Neg, Pos, Pos, Pos};
  const auto w2 = equal_class_weights(two);
  CHECK(w2[0] == doctest::Approx(2.0));
  CHECK(w2[1] == doctest::Approx(4.0 / 6.0));
}

TEST_CASE("logistic regression gradient matches finite differences") {
  Rng rng(3);
  const FeatureMatrix x = oracle::random_matrix(rng, 10, 5);
  const auto y = random_labels(rng, 10);
  std::vector<double> w(10);
  for (auto& v : w) v = 0.5 + rng.uniform();
  const std::vector<int> classes{0, 1, 2};
  Eigen::MatrixXd weights = oracle::random_matrix(rng, 3, 5);
  Eigen::VectorXd bias = oracle::random_matrix(rng, 3, 1);
  const double c = 0.7;

  Eigen::MatrixXd gw;
  Eigen::VectorXd gb;
  logreg_objective(weights, bias, classes, x, y, w, c, &gw, &gb);
  const double h = 1e-6;
  for (Eigen::Index r = 0; r < 3; ++r) {
    for (Eigen::Index col = 0; col < 5; ++col) {
      auto plus = weights, minus = weights;
      plus(r, col) += h;
      minus(r, col) -= h;
      const double fd = (logreg_objective(plus, bias, classes, x, y, w, c) -
                         logreg_objective(minus, bias, classes, x, y, w, c)) /
                        (2 * h);
      CHECK(std::abs(fd - gw(r, col)) <= 1e-6 * std::max(1.0, std::abs(fd)));
    }
    auto plus = bias, minus = bias;
    plus(r) += h;
    minus(r) -= h;
    const double fd = (logreg_objective(weights, plus, classes, x, y, w, c) -
                       logreg_objective(weights, minus, classes, x, y, w, c)) /
                      (2 * h);
    CHECK(std::abs(fd - gb(r)) <= 1e-6 * std::max(1.0, std::abs(fd)));
  }
}

TEST_CASE("logistic regression training") {
  Rng rng(17);
  const auto b = blobs(rng, 30, 0.5);
  LogRegTrace trace;
  const auto model = train_logreg(b.x, b.y, 10.0, {}, {}, &trace);
  CHECK(accuracy(predict(model, b.x), b.y) == 1.0);
  CHECK(trace.gradient_inf_norm <= 1e-6);
  for (std::size_t i = 1; i < trace.objective.size(); ++i) CHECK(trace.objective[i] <= trace.objective[i - 1] + 1e-12);

  // Heavy regularization pulls the weights toward zero.
  const auto tiny = train_logreg(b.x, b.y, 1e-6, {});
  CHECK(std::get<LogRegModel>(tiny.parameters).weights.cwiseAbs().maxCoeff() < 1e-3);

  // The mean loss is unchanged by duplicating every row.
  FeatureMatrix doubled(b.x.rows() * 2, b.x.cols());
  doubled << b.x, b.x;
  auto y2 = b.y;
  y2.insert(y2.end(), b.y.begin(), b.y.end());
  const auto m1 = std::get<LogRegModel>(train_logreg(b.x, b.y, 1.0, {}).parameters);
  const auto m2 = std::get<LogRegModel>(train_logreg(doubled, y2, 1.0, {}).parameters);
  CHECK((m1.weights - m2.weights).cwiseAbs().maxCoeff() <= 1e-5);
  CHECK((m1.bias - m2.bias).cwiseAbs().maxCoeff() <= 1e-5);
}

TEST_CASE("logistic regression with an absent class never predicts it") {
  Rng rng(2);
  auto b = blobs(rng, 20, 0.5);
  FeatureMatrix x = b.x.topRows(40);
  std::vector<SentimentClass> y(b.y.begin(), b.y.begin() + 40);
  const auto model = train_logreg(x, y, 1.0, {});
  const auto& p = std::get<LogRegModel>(model.parameters);
  CHECK(std::isinf(p.bias(2)));
  for (auto c : predict(model, b.x)) CHECK(c != Pos);
}

TEST_CASE("multinomial naive Bayes matches the closed form") {
  Rng rng(41);
  for (int fixture = 0; fixture < 5; ++fixture) {
    const auto n = 6 + rng.below(10);
    const auto d = 2 + rng.below(6);
    std::vector<std::vector<double>> rows(n, std::vector<double>(d));
    FeatureMatrix x(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(d));
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < d; ++j) {
        rows[i][j] = rng.uniform() < 0.3 ? 0.0 : rng.uniform() * 3.0;
        x(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = rows[i][j];
      }
    auto y = random_labels(rng, n);
    if (fixture == 4)
      for (auto& c : y)
        if (c == Neu) c = Neg;  // one class missing
    const double alpha = fixture == 0 ? 1.0 : 0.01 + rng.uniform();
    const auto ref = oracle::naive_bayes(rows, y, alpha);
    const auto model = std::get<NaiveBayesModel>(train_mnb(x, y, alpha).parameters);
    for (int k = 0; k < kNumClasses; ++k) {
      const double lp = ref.log_prior[static_cast<std::size_t>(k)];
      if (std::isinf(lp))
        CHECK(std::isinf(model.log_prior(k)));
      else
        CHECK(std::abs(model.log_prior(k) - lp) <= 1e-12);
      for (std::size_t j = 0; j < d; ++j)
        CHECK(std::abs(model.log_likelihood(k, static_cast<Eigen::Index>(j)) -
                       ref.log_likelihood[static_cast<std::size_t>(k)][j]) <= 1e-12);
    }
  }
}

TEST_CASE("multinomial naive Bayes rejects negative features") {
  FeatureMatrix x(2, 2);
  x << 1.0, -0.5, 0.0, 1.0;
  const std::vector y{Neg, Pos};
  CHECK(code_of([&] { train_mnb(x, y, 1.0); }) == ErrorCode::NonNegativeRequired);
}

TEST_CASE("SVM dual matches exhaustive search") {
  Rng rng(13);
  for (int trial = 0; trial < 25; ++trial) {
    const auto n = static_cast<Eigen::Index>(3 + rng.below(6));
    const FeatureMatrix x = oracle::random_matrix(rng, n, 2);
    Eigen::VectorXd sign(n);
    for (Eigen::Index i = 0; i < n; ++i) sign(i) = rng.uniform() < 0.5 ? 1.0 : -1.0;
    sign(0) = 1.0;
    sign(1) = -1.0;
    const double c = trial % 2 == 0 ? 1.0 : 10.0;
    const Eigen::MatrixXd k = rbf_kernel(x, x, 0.5);
    const auto sol = solve_svm_dual(k, sign, Eigen::VectorXd::Constant(n, c));
    const auto ref = oracle::svm_dual_bruteforce(k, sign, c);
    CHECK(oracle::dual_objective(k, sign, sol.alpha) <= ref.objective + 1e-5);
    SvmOptions tight;
    tight.tolerance = 1e-10;
    const auto precise = solve_svm_dual(k, sign, Eigen::VectorXd::Constant(n, c), tight);
    CHECK((precise.alpha - ref.alpha).cwiseAbs().maxCoeff() <= 1e-6);

    // Box, equality and KKT conditions.
    CHECK(sol.alpha.minCoeff() >= 0.0);
    CHECK(sol.alpha.maxCoeff() <= c);
    CHECK(std::abs(sign.dot(sol.alpha)) <= 1e-9);
    CHECK(sol.kkt_residual <= 1e-3);
    const Eigen::VectorXd f = (k * sol.alpha.cwiseProduct(sign)).array() + sol.intercept;
    for (Eigen::Index i = 0; i < n; ++i) {
      const double margin = sign(i) * f(i);
      if (sol.alpha(i) <= 0.0) CHECK(margin >= 1.0 - 2e-3);
      else if (sol.alpha(i) >= c) CHECK(margin <= 1.0 + 2e-3);
      else CHECK(std::abs(margin - 1.0) <= 2e-3);
    }
  }
}

TEST_CASE("SVM on symmetric and XOR data") {
  // Two points: the decision boundary sits at the midpoint.
  Eigen::MatrixXd k = rbf_kernel(Eigen::Vector2d(-1.0, 1.0), Eigen::Vector2d(-1.0, 1.0), 1.0);
  const auto sol = solve_svm_dual(k, Eigen::Vector2d(-1.0, 1.0), Eigen::Vector2d(1.0, 1.0));
  Eigen::MatrixXd mid(1, 1);
  mid << 0.0;
  const Eigen::MatrixXd sv = Eigen::Vector2d(-1.0, 1.0);
  const double f0 = (rbf_kernel(mid, sv, 1.0) * sol.alpha.cwiseProduct(Eigen::Vector2d(-1.0, 1.0)))(0) + sol.intercept;
  CHECK(std::abs(f0) <= 1e-9);

  FeatureMatrix xor_x(4, 2);
  xor_x << 0, 0, 1, 1, 0, 1, 1, 0;
  const std::vector xor_y{Neg, Neg, Pos, Pos};
  const auto model = train_rbf_svm(xor_x, xor_y, 100.0, 1.0, {});
  CHECK(accuracy(predict(model, xor_x), xor_y) == 1.0);
}

TEST_CASE("SVM decision values follow from stored support vectors") {
  Rng rng(23);
  const auto b = blobs(rng, 15, 1.5);
  const auto model = train_rbf_svm(b.x, b.y, 1.0, 0.1, {});
  const auto& p = std::get<SvmModel>(model.parameters);
  const auto values = svm_decision_values(p, b.x);
  for (int k = 0; k < kNumClasses; ++k) {
    const auto& m = p.machines[static_cast<std::size_t>(k)];
    REQUIRE(m.trained);
    CHECK(m.kkt_residual <= 1e-3);
    CHECK(m.alpha.minCoeff() > 0.0);
    CHECK((m.alpha - m.upper_bound).maxCoeff() <= 0.0);
    for (Eigen::Index i = 0; i < b.x.rows(); ++i) {
      double f = m.intercept;
      for (Eigen::Index s = 0; s < m.support_vectors.rows(); ++s)
        f += m.alpha(s) * m.sign(s) * std::exp(-0.1 * (b.x.row(i) - m.support_vectors.row(s)).squaredNorm());
      CHECK(std::abs(values(i, k) - f) <= 1e-9);
    }
  }
  CHECK(accuracy(predict(model, b.x), b.y) >= 0.95);
}

TEST_CASE("K-Means finds the optimal 1-D split") {
  FeatureMatrix x(4, 1);
  x << 0.0, 0.1, 9.9, 10.0;
  const auto ref = oracle::best_two_partition({0.0, 0.1, 9.9, 10.0});
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const auto fit = kmeans_fit(x, 2, seed);
    const double lo = std::min(fit.centroids(0, 0), fit.centroids(1, 0));
    const double hi = std::max(fit.centroids(0, 0), fit.centroids(1, 0));
    CHECK(lo == doctest::Approx(ref.low_centroid).epsilon(1e-12));
    CHECK(hi == doctest::Approx(ref.high_centroid).epsilon(1e-12));
    CHECK(fit.inertia.back() == doctest::Approx(ref.inertia).epsilon(1e-12));
  }
}

TEST_CASE("K-Means properties") {
  Rng rng(31);
  const auto b = blobs(rng, 40, 0.8);
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto fit = kmeans_fit(b.x, 3, seed);
    for (std::size_t i = 1; i < fit.inertia.size(); ++i) CHECK(fit.inertia[i] <= fit.inertia[i - 1] + 1e-9);
    CHECK(fit.iterations <= kKMeansMaxIterations);
  }

  const FeatureMatrix small = oracle::random_matrix(rng, 6, 3);
  CHECK(kmeans_fit(small, 6, 1).inertia.back() == 0.0);
  CHECK(code_of([&] { kmeans_fit(small, 7, 1); }) == ErrorCode::TooManyClusters);

  const auto classifier = train_kmeans_classifier(b.x, b.y, 3, 5);
  CHECK(accuracy(predict(classifier, b.x), b.y) >= 0.95);

  const auto again = train_kmeans_classifier(b.x, b.y, 3, 5);
  CHECK(std::get<KMeansModel>(again.parameters).centroids == std::get<KMeansModel>(classifier.parameters).centroids);
}

TEST_CASE("generic train and predict") {
  Rng rng(77);
  const auto b = blobs(rng, 20, 0.7, 3);
  const FeatureMatrix nonneg = b.x.array().abs();
  const std::vector<ModelSpec> specs{
      {LogRegParams{1.0}, ClassWeighting::None, 1},
      {NaiveBayesParams{0.5}, ClassWeighting::EqualClass, 1},
      {SvmParams{1.0, 0.1}, ClassWeighting::EqualClass, 1},
      {KMeansParams{3}, ClassWeighting::EqualClass, 1},
  };
  std::vector<Eigen::Index> perm(static_cast<std::size_t>(b.x.rows()));
  std::iota(perm.begin(), perm.end(), 0);
  rng.shuffle(std::span<Eigen::Index>(perm));
  for (const auto& spec : specs) {
    const FeatureMatrix& x = spec.family() == Family::MultinomialNB ? nonneg : b.x;
    const auto model = train(spec, x, b.y);
    CHECK(model.spec == spec);
    CHECK(model.input_dim() == 3);
    const auto p = predict(model, x);

    FeatureMatrix permuted(x.rows(), x.cols());
    for (std::size_t i = 0; i < perm.size(); ++i) permuted.row(static_cast<Eigen::Index>(i)) = x.row(perm[i]);
    const auto pp = predict(model, permuted);
    for (std::size_t i = 0; i < perm.size(); ++i) CHECK(pp[i] == p[static_cast<std::size_t>(perm[i])]);

    CHECK(code_of([&] { predict(model, FeatureMatrix::Ones(2, 4)); }) == ErrorCode::DimensionMismatch);
  }
}

TEST_CASE("argmax ties go to the lower class") {
  Eigen::MatrixXd s(3, 3);
  s << 1, 1, 0, 0, 2, 2, 5, 5, 5;
  CHECK(argmax_rows(s) == std::vector{Neg, Neu, Neg});
}
