#include <sbt/models.hpp>

#include "detail.hpp"

#include <limits>

namespace sbt::models {

TrainedModel train_mnb(const FeatureMatrix& x, std::span<const SentimentClass> y, double alpha,
                       std::span<const double> weights) {
  detail::check_rows(x, y, weights);
  detail::check_positive(alpha, "alpha");
  for (Eigen::Index r = 0; r < x.rows(); ++r)
    for (Eigen::Index c = 0; c < x.cols(); ++c)
      if (x(r, c) < 0.0)
        throw Error(ErrorCode::NonNegativeRequired,
                    fmt::format("multinomial naive Bayes needs nonnegative features; entry ({}, {}) is {}",
                                r, c, x(r, c)));

  const Eigen::Index d = x.cols();
  std::array<double, kNumClasses> class_weight{};
  Eigen::MatrixXd feature_count = Eigen::MatrixXd::Zero(kNumClasses, d);
  for (std::size_t i = 0; i < y.size(); ++i) {
    const auto k = index_of(y[i]);
    const double wi = detail::weight_at(weights, i);
    class_weight[static_cast<std::size_t>(k)] += wi;
    for (Eigen::Index j = 0; j < d; ++j) feature_count(k, j) += wi * x(static_cast<Eigen::Index>(i), j);
  }

  double total = 0.0;
  for (double cw : class_weight) total += cw;

  NaiveBayesModel params;
  params.log_prior.resize(kNumClasses);
  params.log_likelihood.resize(kNumClasses, d);
  const double smoothing_total = alpha * static_cast<double>(d);
  for (int k = 0; k < kNumClasses; ++k) {
    const double cw = class_weight[static_cast<std::size_t>(k)];
    params.log_prior(k) = cw > 0.0 ? std::log(cw / total) : -std::numeric_limits<double>::infinity();
    double row_total = 0.0;
    for (Eigen::Index j = 0; j < d; ++j) row_total += feature_count(k, j);
    for (Eigen::Index j = 0; j < d; ++j)
      params.log_likelihood(k, j) = std::log((feature_count(k, j) + alpha) / (row_total + smoothing_total));
  }

  TrainedModel model;
  model.spec.params = NaiveBayesParams{alpha};
  model.parameters = std::move(params);
  return model;
}

}  // namespace sbt::models
