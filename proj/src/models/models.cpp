#include <sbt/models.hpp>

#include "detail.hpp"

#include <sbt/random.hpp>

#include <limits>

namespace sbt::models {

std::string_view to_string(Family f) {
  switch (f) {
    case Family::LogReg: return "logreg";
    case Family::MultinomialNB: return "multinomial_nb";
    case Family::RbfSvm: return "rbf_svm";
    case Family::KMeans: return "kmeans";
  }
  return "logreg";
}

std::string_view to_string(ClassWeighting w) {
  return w == ClassWeighting::None ? "none" : "equal_class";
}

std::string describe(const Hyperparameters& params) {
  struct Visitor {
    std::string operator()(const LogRegParams& p) const { return fmt::format("C: {:g}", p.c); }
    std::string operator()(const NaiveBayesParams& p) const { return fmt::format("alpha: {:g}", p.alpha); }
    std::string operator()(const SvmParams& p) const {
      return fmt::format("C: {:g} y: {:g}", p.c, p.gamma);
    }
    std::string operator()(const KMeansParams& p) const { return fmt::format("n: {}", p.n_clusters); }
  };
  return std::visit(Visitor{}, params);
}

SampleWeights equal_class_weights(std::span<const SentimentClass> labels) {
  std::array<std::size_t, kNumClasses> counts{};
  for (auto c : labels) ++counts[static_cast<std::size_t>(index_of(c))];
  std::size_t present = 0;
  for (auto n : counts) present += n > 0;
  const double n = static_cast<double>(labels.size());
  SampleWeights w;
  w.reserve(labels.size());
  for (auto c : labels)
    w.push_back(n / (static_cast<double>(present) *
                     static_cast<double>(counts[static_cast<std::size_t>(index_of(c))])));
  return w;
}

std::size_t TrainedModel::input_dim() const {
  struct Visitor {
    std::size_t operator()(const LogRegModel& m) const { return static_cast<std::size_t>(m.weights.cols()); }
    std::size_t operator()(const NaiveBayesModel& m) const {
      return static_cast<std::size_t>(m.log_likelihood.cols());
    }
    std::size_t operator()(const SvmModel& m) const { return m.input_dim; }
    std::size_t operator()(const KMeansModel& m) const { return static_cast<std::size_t>(m.centroids.cols()); }
  };
  return std::visit(Visitor{}, parameters);
}

std::vector<SentimentClass> argmax_rows(const Eigen::MatrixXd& scores) {
  std::vector<SentimentClass> out(static_cast<std::size_t>(scores.rows()));
  for (Eigen::Index r = 0; r < scores.rows(); ++r) {
    Eigen::Index best = 0;
    for (Eigen::Index c = 1; c < scores.cols(); ++c)
      if (scores(r, c) > scores(r, best)) best = c;
    out[static_cast<std::size_t>(r)] = class_at(static_cast<int>(best));
  }
  return out;
}

namespace {

// Seeded per-class subsample down to the size of the smallest present class.
std::vector<std::size_t> balanced_subsample(std::span<const SentimentClass> y, std::uint64_t seed) {
  std::array<std::vector<std::size_t>, kNumClasses> by_class;
  for (std::size_t i = 0; i < y.size(); ++i) by_class[static_cast<std::size_t>(index_of(y[i]))].push_back(i);
  std::size_t smallest = std::numeric_limits<std::size_t>::max();
  for (const auto& members : by_class)
    if (!members.empty()) smallest = std::min(smallest, members.size());

  Rng rng(seed ^ 0x9e3779b97f4a7c15ULL);
  std::vector<std::size_t> keep;
  for (auto& members : by_class) {
    if (members.empty()) continue;
    rng.shuffle(std::span<std::size_t>(members));
    keep.insert(keep.end(), members.begin(), members.begin() + static_cast<std::ptrdiff_t>(smallest));
  }
  std::sort(keep.begin(), keep.end());
  return keep;
}

}  // namespace

TrainedModel train(const ModelSpec& spec, const FeatureMatrix& x, std::span<const SentimentClass> y) {
  detail::check_rows(x, y, {});
  SampleWeights weights;
  if (spec.class_weighting == ClassWeighting::EqualClass && spec.family() != Family::KMeans)
    weights = equal_class_weights(y);

  TrainedModel model = [&]() -> TrainedModel {
    switch (spec.family()) {
      case Family::LogReg:
        return train_logreg(x, y, std::get<LogRegParams>(spec.params).c, weights);
      case Family::MultinomialNB:
        return train_mnb(x, y, std::get<NaiveBayesParams>(spec.params).alpha, weights);
      case Family::RbfSvm: {
        const auto& p = std::get<SvmParams>(spec.params);
        return train_rbf_svm(x, y, p.c, p.gamma, weights);
      }
      case Family::KMeans: {
        const auto n_clusters = std::get<KMeansParams>(spec.params).n_clusters;
        if (spec.class_weighting == ClassWeighting::None)
          return train_kmeans_classifier(x, y, n_clusters, spec.seed);
        const auto keep = balanced_subsample(y, spec.seed);
        FeatureMatrix xs(static_cast<Eigen::Index>(keep.size()), x.cols());
        std::vector<SentimentClass> ys;
        ys.reserve(keep.size());
        for (std::size_t i = 0; i < keep.size(); ++i) {
          xs.row(static_cast<Eigen::Index>(i)) = x.row(static_cast<Eigen::Index>(keep[i]));
          ys.push_back(y[keep[i]]);
        }
        return train_kmeans_classifier(xs, ys, n_clusters, spec.seed);
      }
    }
    throw Error(ErrorCode::InvalidArgument, "unknown model family");
  }();
  model.spec = spec;
  return model;
}

std::vector<SentimentClass> predict(const TrainedModel& model, const FeatureMatrix& x) {
  if (static_cast<std::size_t>(x.cols()) != model.input_dim())
    throw Error(ErrorCode::DimensionMismatch,
                fmt::format("input has {} columns, model expects {}", x.cols(), model.input_dim()));

  struct Visitor {
    const FeatureMatrix& x;
    std::vector<SentimentClass> operator()(const LogRegModel& m) const {
      Eigen::MatrixXd scores = x * m.weights.transpose();
      scores.rowwise() += m.bias.transpose();
      return argmax_rows(scores);
    }
    std::vector<SentimentClass> operator()(const NaiveBayesModel& m) const {
      Eigen::MatrixXd scores = x * m.log_likelihood.transpose();
      scores.rowwise() += m.log_prior.transpose();
      return argmax_rows(scores);
    }
    std::vector<SentimentClass> operator()(const SvmModel& m) const {
      return argmax_rows(svm_decision_values(m, x));
    }
    std::vector<SentimentClass> operator()(const KMeansModel& m) const {
      std::vector<SentimentClass> out(static_cast<std::size_t>(x.rows()));
      for (Eigen::Index r = 0; r < x.rows(); ++r) {
        Eigen::Index best = 0;
        double best_d = std::numeric_limits<double>::infinity();
        for (Eigen::Index c = 0; c < m.centroids.rows(); ++c) {
          const double d = (m.centroids.row(c) - x.row(r)).squaredNorm();
          if (d < best_d) {
            best_d = d;
            best = c;
          }
        }
        out[static_cast<std::size_t>(r)] = m.cluster_class[static_cast<std::size_t>(best)];
      }
      return out;
    }
  };
  return std::visit(Visitor{x}, model.parameters);
}

}  // namespace sbt::models
