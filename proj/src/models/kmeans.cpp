#include <sbt/models.hpp>

#include "detail.hpp"

#include <sbt/random.hpp>

#include <limits>

namespace sbt::models {

namespace {

// Nearest centroid per row (lowest index on ties); returns total inertia.
double assign(const FeatureMatrix& x, const Eigen::MatrixXd& centroids, std::vector<std::size_t>& assignment,
              std::vector<double>& distance) {
  double inertia = 0.0;
  for (Eigen::Index r = 0; r < x.rows(); ++r) {
    Eigen::Index best = 0;
    double best_d = std::numeric_limits<double>::infinity();
    for (Eigen::Index c = 0; c < centroids.rows(); ++c) {
      const double d = (centroids.row(c) - x.row(r)).squaredNorm();
      if (d < best_d) {
        best_d = d;
        best = c;
      }
    }
    assignment[static_cast<std::size_t>(r)] = static_cast<std::size_t>(best);
    distance[static_cast<std::size_t>(r)] = best_d;
    inertia += best_d;
  }
  return inertia;
}

}  // namespace

KMeansFit kmeans_fit(const FeatureMatrix& x, std::size_t n_clusters, std::uint64_t seed, int max_iterations) {
  const auto n = static_cast<std::size_t>(x.rows());
  if (n_clusters == 0) throw Error(ErrorCode::InvalidArgument, "K-Means needs at least one cluster");
  if (n_clusters > n)
    throw Error(ErrorCode::TooManyClusters, fmt::format("{} clusters requested for {} rows", n_clusters, n));

  const auto k = static_cast<Eigen::Index>(n_clusters);
  KMeansFit fit;
  fit.centroids.resize(k, x.cols());

  // Farthest-point initialization.
  Rng rng(seed);
  std::size_t first = rng.below(n);
  fit.centroids.row(0) = x.row(static_cast<Eigen::Index>(first));
  std::vector<double> nearest(n);
  for (std::size_t i = 0; i < n; ++i)
    nearest[i] = (x.row(static_cast<Eigen::Index>(i)) - fit.centroids.row(0)).squaredNorm();
  for (Eigen::Index c = 1; c < k; ++c) {
    std::size_t far = 0;
    for (std::size_t i = 1; i < n; ++i)
      if (nearest[i] > nearest[far]) far = i;
    fit.centroids.row(c) = x.row(static_cast<Eigen::Index>(far));
    for (std::size_t i = 0; i < n; ++i)
      nearest[i] = std::min(nearest[i], (x.row(static_cast<Eigen::Index>(i)) - fit.centroids.row(c)).squaredNorm());
  }

  fit.assignment.assign(n, 0);
  std::vector<std::size_t> previous;
  std::vector<double> distance(n);
  for (int it = 0; it < max_iterations; ++it) {
    fit.inertia.push_back(assign(x, fit.centroids, fit.assignment, distance));
    fit.iterations = it + 1;
    if (fit.assignment == previous) break;
    previous = fit.assignment;

    Eigen::MatrixXd sums = Eigen::MatrixXd::Zero(k, x.cols());
    std::vector<std::size_t> counts(n_clusters, 0);
    for (std::size_t i = 0; i < n; ++i) {
      sums.row(static_cast<Eigen::Index>(fit.assignment[i])) += x.row(static_cast<Eigen::Index>(i));
      ++counts[fit.assignment[i]];
    }
    for (Eigen::Index c = 0; c < k; ++c)
      if (counts[static_cast<std::size_t>(c)] > 0)
        fit.centroids.row(c) = sums.row(c) / static_cast<double>(counts[static_cast<std::size_t>(c)]);

    // Empty clusters are re-seeded at the point farthest from its own
    // (updated) centroid; each point is used at most once per pass.
    std::vector<bool> used(n, false);
    for (Eigen::Index c = 0; c < k; ++c) {
      if (counts[static_cast<std::size_t>(c)] > 0) continue;
      std::size_t far = n;
      double far_d = -1.0;
      for (std::size_t i = 0; i < n; ++i) {
        if (used[i]) continue;
        const double d =
            (x.row(static_cast<Eigen::Index>(i)) - fit.centroids.row(static_cast<Eigen::Index>(fit.assignment[i])))
                .squaredNorm();
        if (d > far_d) {
          far_d = d;
          far = i;
        }
      }
      if (far == n) continue;
      used[far] = true;
      fit.centroids.row(c) = x.row(static_cast<Eigen::Index>(far));
    }
  }
  return fit;
}

TrainedModel train_kmeans_classifier(const FeatureMatrix& x, std::span<const SentimentClass> y,
                                     std::size_t n_clusters, std::uint64_t seed) {
  detail::check_rows(x, y, {});
  KMeansFit fit = kmeans_fit(x, n_clusters, seed);

  std::vector<std::array<std::size_t, kNumClasses>> votes(n_clusters);
  for (std::size_t i = 0; i < y.size(); ++i)
    ++votes[fit.assignment[i]][static_cast<std::size_t>(index_of(y[i]))];

  KMeansModel params;
  params.centroids = std::move(fit.centroids);
  params.cluster_class.reserve(n_clusters);
  constexpr auto kNeutral = static_cast<std::size_t>(index_of(SentimentClass::Neutral));
  for (const auto& v : votes) {
    const std::size_t top = *std::max_element(v.begin(), v.end());
    std::size_t pick = kNeutral;
    if (v[kNeutral] != top)
      for (std::size_t c = 0; c < kNumClasses; ++c)
        if (v[c] == top) {
          pick = c;
          break;
        }
    params.cluster_class.push_back(class_at(static_cast<int>(pick)));
  }

  TrainedModel model;
  model.spec.params = KMeansParams{n_clusters};
  model.spec.seed = seed;
  model.parameters = std::move(params);
  return model;
}

}  // namespace sbt::models
