#include <doctest.h>

#include "support/oracles.hpp"

#include <sbt/error.hpp>
#include <sbt/features.hpp>
#include <sbt/random.hpp>

#include <cmath>

using namespace sbt;
using namespace sbt::features;

namespace {

ErrorCode code_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected an sbt::Error");
  return ErrorCode::InvalidArgument;
}

std::string random_doc(Rng& rng, std::size_t max_words) {
  static const std::vector<std::string> words{"stock", "rally", "loss", "profit", "guidance", "cut",
                                              "beat", "miss", "ceo", "q3", "up", "down"};
  std::string doc;
  const auto n = rng.below(max_words + 1);
  for (std::size_t i = 0; i < n; ++i) {
    if (!doc.empty()) doc += rng.uniform() < 0.2 ? ", " : " ";
    doc += words[rng.below(words.size())];
  }
  return doc;
}

// Largest |cosine| between a column of `a` and the matching column of `b`.
double column_alignment(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
  return std::abs(a.dot(b)) / (a.norm() * b.norm());
}

}  // namespace

TEST_CASE("tokenizer") {
  using V = std::vector<std::string>;
  CHECK(tokenize("Apple beats Q3 estimates!", NgramRange::Unigram) == V{"apple", "beats", "q3", "estimates"});
  CHECK(tokenize("a I x9 ok", NgramRange::Unigram) == V{"x9", "ok"});
  CHECK(tokenize("Profit up sharply", NgramRange::UnigramBigram) ==
        V{"profit", "up", "sharply", "profit up", "up sharply"});
  CHECK(tokenize("caf\xc3\xa9s ok", NgramRange::Unigram) == V{"caf", "ok"});
  CHECK(tokenize("", NgramRange::UnigramBigram).empty());
  CHECK(tokenize("single", NgramRange::UnigramBigram) == V{"single"});
}

TEST_CASE("tf-idf worked example") {
  const std::vector<std::string> docs{"good good bad", "bad"};
  const auto t = fit_tfidf(docs, NgramRange::Unigram);
  REQUIRE(t.vocabulary.tokens() == std::vector<std::string>{"bad", "good"});
  CHECK(t.idf(0) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(t.idf(1) == doctest::Approx(std::log(1.5) + 1.0).epsilon(1e-12));
  CHECK(t.idf(1) == doctest::Approx(1.4055).epsilon(1e-4));

  const auto x = apply_tfidf(t, docs);
  CHECK(x(0, 0) == doctest::Approx(0.3352).epsilon(1e-3));
  CHECK(x(0, 1) == doctest::Approx(0.9422).epsilon(1e-3));
  CHECK(x(1, 0) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(x(1, 1) == 0.0);

  const std::vector<std::string> unseen{"nothing known here"};
  CHECK(apply_tfidf(t, unseen).norm() == 0.0);
}

TEST_CASE("tf-idf errors") {
  CHECK(code_of([] { fit_tfidf(std::vector<std::string>{}, NgramRange::Unigram); }) == ErrorCode::EmptyCorpus);
  CHECK(code_of([] { fit_tfidf(std::vector<std::string>{"a", "! ?"}, NgramRange::Unigram); }) ==
        ErrorCode::NoTokens);
}

TEST_CASE("tf-idf rows are unit length or zero") {
  Rng rng(99);
  std::vector<std::string> docs;
  for (int i = 0; i < 1000; ++i) docs.push_back(random_doc(rng, 12));
  docs.push_back("stock");
  const auto t = fit_tfidf(docs, NgramRange::UnigramBigram);
  const auto x = apply_tfidf(t, docs);
  for (Eigen::Index r = 0; r < x.rows(); ++r) {
    const double n = x.row(r).norm();
    const bool has_tokens = !tokenize(docs[static_cast<std::size_t>(r)], NgramRange::Unigram).empty();
    if (has_tokens)
      CHECK(std::abs(n - 1.0) <= 1e-12);
    else
      CHECK(n == 0.0);
    CHECK(x.row(r).allFinite());
  }

  // idf never increases with document frequency.
  const auto& df = t.vocabulary.document_frequency();
  for (std::size_t i = 0; i < df.size(); ++i)
    for (std::size_t j = 0; j < df.size(); ++j)
      if (df[i] < df[j]) CHECK(t.idf(static_cast<Eigen::Index>(i)) >= t.idf(static_cast<Eigen::Index>(j)));
}

TEST_CASE("truncated SVD agrees with the Gram eigen-decomposition") {
  Rng rng(5);
  for (int trial = 0; trial < 10; ++trial) {
    const auto rows = static_cast<Eigen::Index>(8 + rng.below(20));
    const auto cols = static_cast<Eigen::Index>(3 + rng.below(8));
    const Eigen::MatrixXd x = oracle::random_matrix(rng, rows, cols);
    const auto k = std::min<std::size_t>(static_cast<std::size_t>(cols), 4);
    const auto svd = fit_svd(x, k);
    const auto ref = oracle::svd_from_gram(x);
    REQUIRE(svd.output_dim() == k);
    for (std::size_t i = 0; i < k; ++i) {
      const auto c = static_cast<Eigen::Index>(i);
      CHECK(std::abs(svd.singular_values(c) - ref.singular_values(c)) <= 1e-8);
      const double sign = svd.components.col(c).dot(ref.right_vectors.col(c)) >= 0 ? 1.0 : -1.0;
      CHECK((svd.components.col(c) - sign * ref.right_vectors.col(c)).cwiseAbs().maxCoeff() <= 1e-8);
    }
    const Eigen::MatrixXd gram = svd.components.transpose() * svd.components;
    CHECK((gram - Eigen::MatrixXd::Identity(gram.rows(), gram.cols())).cwiseAbs().maxCoeff() <= 1e-10);
    for (Eigen::Index c = 0; c < svd.components.cols(); ++c) {
      Eigen::Index at = 0;
      svd.components.col(c).cwiseAbs().maxCoeff(&at);
      CHECK(svd.components(at, c) >= 0.0);
    }
  }
}

TEST_CASE("SVD of simple matrices") {
  const auto id = fit_svd(Eigen::MatrixXd::Identity(4, 4), 2);
  CHECK(id.singular_values(0) == doctest::Approx(1.0));
  CHECK(id.singular_values(1) == doctest::Approx(1.0));

  Eigen::MatrixXd diag = Eigen::MatrixXd::Zero(3, 3);
  diag.diagonal() << 1.0, 3.0, 2.0;
  const auto d = fit_svd(diag, 3);
  CHECK(d.singular_values(0) == doctest::Approx(3.0));
  CHECK(d.singular_values(1) == doctest::Approx(2.0));
  CHECK(d.singular_values(2) == doctest::Approx(1.0));
  CHECK(column_alignment(d.components.col(0), Eigen::Vector3d(0, 1, 0)) == doctest::Approx(1.0));
  CHECK(d.components(1, 0) == doctest::Approx(1.0));

  // k larger than the matrix keeps min(k, rows, cols) components.
  CHECK(fit_svd(Eigen::MatrixXd::Ones(2, 5), 100).output_dim() == 2);
  CHECK(code_of([] { fit_svd(Eigen::MatrixXd::Ones(2, 2), 0); }) == ErrorCode::InvalidArgument);
}

TEST_CASE("SVD captures at least the variance of random projections") {
  Rng rng(11);
  const Eigen::MatrixXd x = oracle::random_matrix(rng, 60, 12);
  const auto svd = fit_svd(x, 3);
  const double captured = apply_svd(svd, x).squaredNorm();
  for (int trial = 0; trial < 50; ++trial) {
    const Eigen::MatrixXd q = oracle::random_matrix(rng, 12, 3).householderQr().householderQ() *
                              Eigen::MatrixXd::Identity(12, 3);
    CHECK(captured >= (x * q).squaredNorm() - 1e-9);
  }

  // Full rank keeps everything.
  const auto full = fit_svd(x, 12);
  const Eigen::MatrixXd back = apply_svd(full, x) * full.components.transpose();
  CHECK((back - x).cwiseAbs().maxCoeff() <= 1e-10);
}

TEST_CASE("SVD projection validates width") {
  const auto svd = fit_svd(Eigen::MatrixXd::Identity(4, 4), 2);
  CHECK(code_of([&] { apply_svd(svd, Eigen::MatrixXd::Ones(2, 3)); }) == ErrorCode::DimensionMismatch);
  CHECK(apply_svd(svd, Eigen::MatrixXd::Ones(2, 4)).cols() == 2);
}
