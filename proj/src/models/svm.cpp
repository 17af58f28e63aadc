#include <sbt/models.hpp>

#include "detail.hpp"

#include <limits>

namespace sbt::models {

namespace {

constexpr double kTau = 1e-12;  // curvature floor for non-positive-definite pairs

}  // namespace

Eigen::MatrixXd rbf_kernel(const FeatureMatrix& a, const FeatureMatrix& b, double gamma) {
  const Eigen::VectorXd na = a.rowwise().squaredNorm();
  const Eigen::VectorXd nb = b.rowwise().squaredNorm();
  Eigen::MatrixXd k = -2.0 * (a * b.transpose());
  k.colwise() += na;
  k.rowwise() += nb.transpose();
  return (-gamma * k.array().max(0.0)).exp().matrix();
}

DualSolution solve_svm_dual(const Eigen::MatrixXd& kernel, const Eigen::VectorXd& sign,
                            const Eigen::VectorXd& upper, const SvmOptions& options) {
  const Eigen::Index n = kernel.rows();
  if (kernel.cols() != n || sign.size() != n || upper.size() != n)
    throw Error(ErrorCode::DimensionMismatch, "kernel, labels and bounds disagree in size");

  Eigen::VectorXd alpha = Eigen::VectorXd::Zero(n);
  Eigen::VectorXd grad = Eigen::VectorXd::Constant(n, -1.0);  // Q alpha - e
  const auto cap = static_cast<std::size_t>(options.max_updates_factor * static_cast<double>(n) *
                                            static_cast<double>(n));
  const auto q = [&](Eigen::Index i, Eigen::Index j) { return sign(i) * sign(j) * kernel(i, j); };
  const auto in_up = [&](Eigen::Index t) {
    return (sign(t) > 0 && alpha(t) < upper(t)) || (sign(t) < 0 && alpha(t) > 0.0);
  };
  const auto in_low = [&](Eigen::Index t) {
    return (sign(t) < 0 && alpha(t) < upper(t)) || (sign(t) > 0 && alpha(t) > 0.0);
  };

  std::size_t updates = 0;
  double residual = 0.0;
  for (;;) {
    // i: maximal violator in I_up; j: second-order choice in I_low.
    Eigen::Index i = -1;
    double g_max = -std::numeric_limits<double>::infinity();
    for (Eigen::Index t = 0; t < n; ++t)
      if (in_up(t) && -sign(t) * grad(t) > g_max) {
        g_max = -sign(t) * grad(t);
        i = t;
      }
    double g_min = std::numeric_limits<double>::infinity();
    Eigen::Index j = -1;
    double best_gain = std::numeric_limits<double>::infinity();
    for (Eigen::Index t = 0; t < n; ++t) {
      if (!in_low(t)) continue;
      const double v = -sign(t) * grad(t);
      g_min = std::min(g_min, v);
      if (i < 0) continue;
      const double b = g_max - v;
      if (b > 0.0) {
        double a = kernel(i, i) + kernel(t, t) - 2.0 * kernel(i, t);
        if (a <= 0.0) a = kTau;
        const double gain = -(b * b) / a;
        if (gain < best_gain) {
          best_gain = gain;
          j = t;
        }
      }
    }
    residual = (i < 0 || !std::isfinite(g_min)) ? 0.0 : std::max(0.0, g_max - g_min);
    if (residual <= options.tolerance || j < 0) break;
    if (updates >= cap)
      throw Error(ErrorCode::NonConvergence,
                  fmt::format("SMO stopped after {} pair updates with KKT residual {:.3e} (tolerance {:g})",
                              updates, residual, options.tolerance));
    ++updates;

    const double old_i = alpha(i);
    const double old_j = alpha(j);
    const double ci = upper(i);
    const double cj = upper(j);
    if (sign(i) != sign(j)) {
      double quad = kernel(i, i) + kernel(j, j) - 2.0 * kernel(i, j);
      if (quad <= 0.0) quad = kTau;
      const double delta = (-grad(i) - grad(j)) / quad;
      const double diff = alpha(i) - alpha(j);
      alpha(i) += delta;
      alpha(j) += delta;
      if (diff > 0.0) {
        if (alpha(j) < 0.0) {
          alpha(j) = 0.0;
          alpha(i) = diff;
        }
      } else if (alpha(i) < 0.0) {
        alpha(i) = 0.0;
        alpha(j) = -diff;
      }
      if (diff > ci - cj) {
        if (alpha(i) > ci) {
          alpha(i) = ci;
          alpha(j) = ci - diff;
        }
      } else if (alpha(j) > cj) {
        alpha(j) = cj;
        alpha(i) = cj + diff;
      }
    } else {
      double quad = kernel(i, i) + kernel(j, j) - 2.0 * kernel(i, j);
      if (quad <= 0.0) quad = kTau;
      const double delta = (grad(i) - grad(j)) / quad;
      const double sum = alpha(i) + alpha(j);
      alpha(i) -= delta;
      alpha(j) += delta;
      if (sum > ci) {
        if (alpha(i) > ci) {
          alpha(i) = ci;
          alpha(j) = sum - ci;
        }
      } else if (alpha(j) < 0.0) {
        alpha(j) = 0.0;
        alpha(i) = sum;
      }
      if (sum > cj) {
        if (alpha(j) > cj) {
          alpha(j) = cj;
          alpha(i) = sum - cj;
        }
      } else if (alpha(i) < 0.0) {
        alpha(i) = 0.0;
        alpha(j) = sum;
      }
    }

    const double di = alpha(i) - old_i;
    const double dj = alpha(j) - old_j;
    for (Eigen::Index t = 0; t < n; ++t) grad(t) += q(i, t) * di + q(j, t) * dj;
  }

  // Intercept from free variables, or the midpoint of the feasible interval.
  double upper_bound = std::numeric_limits<double>::infinity();
  double lower_bound = -std::numeric_limits<double>::infinity();
  double free_sum = 0.0;
  std::size_t n_free = 0;
  for (Eigen::Index t = 0; t < n; ++t) {
    const double yg = sign(t) * grad(t);
    if (alpha(t) >= upper(t)) {
      if (sign(t) < 0)
        upper_bound = std::min(upper_bound, yg);
      else
        lower_bound = std::max(lower_bound, yg);
    } else if (alpha(t) <= 0.0) {
      if (sign(t) > 0)
        upper_bound = std::min(upper_bound, yg);
      else
        lower_bound = std::max(lower_bound, yg);
    } else {
      ++n_free;
      free_sum += yg;
    }
  }
  const double rho = n_free > 0 ? free_sum / static_cast<double>(n_free) : (upper_bound + lower_bound) / 2.0;

  DualSolution out;
  out.alpha = std::move(alpha);
  out.intercept = -rho;
  out.kkt_residual = residual;
  out.updates = updates;
  return out;
}

TrainedModel train_rbf_svm(const FeatureMatrix& x, std::span<const SentimentClass> y, double c,
                           double gamma, std::span<const double> weights, const SvmOptions& options) {
  detail::check_rows(x, y, weights);
  detail::check_positive(c, "C");
  detail::check_positive(gamma, "gamma");
  detail::require_two_classes(y, "RBF SVM");

  const auto n = static_cast<Eigen::Index>(y.size());
  const Eigen::MatrixXd kernel = rbf_kernel(x, x, gamma);
  Eigen::VectorXd upper(n);
  for (Eigen::Index i = 0; i < n; ++i) upper(i) = c * detail::weight_at(weights, static_cast<std::size_t>(i));

  const auto present = detail::present_classes(y);
  SvmModel params;
  params.gamma = gamma;
  params.input_dim = static_cast<std::size_t>(x.cols());
  for (int k = 0; k < kNumClasses; ++k) {
    if (!present[static_cast<std::size_t>(k)]) continue;
    Eigen::VectorXd sign(n);
    for (Eigen::Index i = 0; i < n; ++i) sign(i) = index_of(y[static_cast<std::size_t>(i)]) == k ? 1.0 : -1.0;

    DualSolution sol;
    try {
      sol = solve_svm_dual(kernel, sign, upper, options);
    } catch (const Error& e) {
      if (e.code() != ErrorCode::NonConvergence) throw;
      throw Error(ErrorCode::NonConvergence,
                  fmt::format("one-vs-rest machine for class {}: {}", to_string(class_at(k)), e.message()));
    }

    std::vector<Eigen::Index> support;
    for (Eigen::Index i = 0; i < n; ++i)
      if (sol.alpha(i) > 0.0) support.push_back(i);
    auto& m = params.machines[static_cast<std::size_t>(k)];
    m.trained = true;
    const auto n_sv = static_cast<Eigen::Index>(support.size());
    m.support_vectors.resize(n_sv, x.cols());
    m.alpha.resize(n_sv);
    m.sign.resize(n_sv);
    m.upper_bound.resize(n_sv);
    for (Eigen::Index s = 0; s < n_sv; ++s) {
      const auto i = support[static_cast<std::size_t>(s)];
      m.support_vectors.row(s) = x.row(i);
      m.alpha(s) = sol.alpha(i);
      m.sign(s) = sign(i);
      m.upper_bound(s) = upper(i);
    }
    m.intercept = sol.intercept;
    m.kkt_residual = sol.kkt_residual;
  }

  TrainedModel model;
  model.spec.params = SvmParams{c, gamma};
  model.parameters = std::move(params);
  return model;
}

Eigen::MatrixXd svm_decision_values(const SvmModel& model, const FeatureMatrix& x) {
  Eigen::MatrixXd values =
      Eigen::MatrixXd::Constant(x.rows(), kNumClasses, -std::numeric_limits<double>::infinity());
  for (int k = 0; k < kNumClasses; ++k) {
    const auto& m = model.machines[static_cast<std::size_t>(k)];
    if (!m.trained) continue;
    if (m.alpha.size() == 0) {
      values.col(k).setConstant(m.intercept);
      continue;
    }
    const Eigen::VectorXd coef = m.alpha.cwiseProduct(m.sign);
    values.col(k) = (rbf_kernel(x, m.support_vectors, model.gamma) * coef).array() + m.intercept;
  }
  return values;
}

}  // namespace sbt::models
