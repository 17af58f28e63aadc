#include <sbt/models.hpp>

#include "detail.hpp"

#include <deque>
#include <limits>

namespace sbt::models {

double logreg_objective(const Eigen::MatrixXd& weights, const Eigen::VectorXd& bias,
                        std::span<const int> classes, const FeatureMatrix& x,
                        std::span<const SentimentClass> y, std::span<const double> w, double c,
                        Eigen::MatrixXd* grad_weights, Eigen::VectorXd* grad_bias) {
  const Eigen::Index n = x.rows();
  const auto k = static_cast<Eigen::Index>(classes.size());
  std::array<Eigen::Index, kNumClasses> position;
  position.fill(-1);
  for (Eigen::Index j = 0; j < k; ++j) position[static_cast<std::size_t>(classes[static_cast<std::size_t>(j)])] = j;

  Eigen::MatrixXd scores = x * weights.transpose();
  scores.rowwise() += bias.transpose();

  double total_weight = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) total_weight += detail::weight_at(w, static_cast<std::size_t>(i));

  double loss = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto target = position[static_cast<std::size_t>(index_of(y[static_cast<std::size_t>(i)]))];
    if (target < 0) throw Error(ErrorCode::InvalidArgument, "label outside the trained class set");
    const double m = scores.row(i).maxCoeff();
    auto row = scores.row(i);
    row.array() = (row.array() - m).exp();
    const double sum = row.sum();
    const double wi = detail::weight_at(w, static_cast<std::size_t>(i)) / total_weight;
    loss += wi * (std::log(sum) - std::log(row(target)));
    if (grad_weights || grad_bias) {
      row /= sum;
      row(target) -= 1.0;
      row *= wi;
    }
  }
  const double objective = loss + weights.squaredNorm() / (2.0 * c);
  if (grad_weights) *grad_weights = scores.transpose() * x + weights / c;
  if (grad_bias) *grad_bias = scores.colwise().sum().transpose();
  return objective;
}

TrainedModel train_logreg(const FeatureMatrix& x, std::span<const SentimentClass> y, double c,
                          std::span<const double> weights, const LogRegOptions& options,
                          LogRegTrace* trace) {
  detail::check_rows(x, y, weights);
  detail::check_positive(c, "C");
  detail::require_two_classes(y, "logistic regression");

  const auto present = detail::present_classes(y);
  std::vector<int> classes;
  for (int j = 0; j < kNumClasses; ++j)
    if (present[static_cast<std::size_t>(j)]) classes.push_back(j);
  const auto k = static_cast<Eigen::Index>(classes.size());
  const Eigen::Index d = x.cols();
  const Eigen::Index n_params = k * d + k;

  // theta = [vec(W) (column-major, k x d); b]
  auto evaluate = [&](const Eigen::VectorXd& theta, Eigen::VectorXd& grad) {
    const Eigen::Map<const Eigen::MatrixXd> wmat(theta.data(), k, d);
    const Eigen::VectorXd b = theta.tail(k);
    Eigen::MatrixXd gw;
    Eigen::VectorXd gb;
    const double f = logreg_objective(wmat, b, classes, x, y, weights, c, &gw, &gb);
    grad.resize(n_params);
    grad.head(k * d) = Eigen::Map<const Eigen::VectorXd>(gw.data(), k * d);
    grad.tail(k) = gb;
    return f;
  };

  Eigen::VectorXd theta = Eigen::VectorXd::Zero(n_params);
  Eigen::VectorXd grad;
  double f = evaluate(theta, grad);
  if (trace) {
    trace->objective.assign(1, f);
    trace->iterations = 0;
  }

  std::deque<std::pair<Eigen::VectorXd, Eigen::VectorXd>> memory;  // (s, y) pairs
  Eigen::VectorXd grad_new;
  int iteration = 0;
  for (; iteration < options.max_iterations; ++iteration) {
    if (grad.lpNorm<Eigen::Infinity>() <= options.gradient_tolerance) break;

    // Two-loop recursion.
    Eigen::VectorXd dir = -grad;
    std::vector<double> rho_alpha(memory.size());
    for (std::size_t m = memory.size(); m-- > 0;) {
      const auto& [s, yv] = memory[m];
      const double rho = 1.0 / yv.dot(s);
      rho_alpha[m] = rho * s.dot(dir);
      dir -= rho_alpha[m] * yv;
    }
    double initial_step = 1.0;
    if (!memory.empty()) {
      const auto& [s, yv] = memory.back();
      dir *= s.dot(yv) / yv.squaredNorm();
    } else {
      initial_step = std::min(1.0, 1.0 / grad.lpNorm<Eigen::Infinity>());
    }
    for (std::size_t m = 0; m < memory.size(); ++m) {
      const auto& [s, yv] = memory[m];
      const double rho = 1.0 / yv.dot(s);
      const double beta = rho * yv.dot(dir);
      dir += (rho_alpha[m] - beta) * s;
    }
    double slope = grad.dot(dir);
    if (!(slope < 0.0)) {
      memory.clear();
      dir = -grad;
      slope = grad.dot(dir);
      initial_step = std::min(1.0, 1.0 / grad.lpNorm<Eigen::Infinity>());
    }

    // Backtracking Armijo line search; a step is accepted only if it lowers f.
    double step = initial_step;
    double f_new = f;
    bool accepted = false;
    for (int tries = 0; tries < 60; ++tries) {
      f_new = evaluate(theta + step * dir, grad_new);
      if (std::isfinite(f_new) && f_new <= f + 1e-4 * step * slope && f_new <= f) {
        accepted = true;
        break;
      }
      step *= 0.5;
    }
    if (!accepted) {
      if (memory.empty()) break;  // steepest descent cannot make progress: numerically converged
      memory.clear();
      continue;
    }

    Eigen::VectorXd s = step * dir;
    Eigen::VectorXd yv = grad_new - grad;
    theta += s;
    grad.swap(grad_new);
    f = f_new;
    if (yv.dot(s) > 1e-12 * yv.squaredNorm()) {
      memory.emplace_back(std::move(s), std::move(yv));
      if (static_cast<int>(memory.size()) > options.history) memory.pop_front();
    }
    if (trace) trace->objective.push_back(f);
  }
  if (trace) {
    trace->iterations = iteration;
    trace->gradient_inf_norm = grad.lpNorm<Eigen::Infinity>();
  }

  LogRegModel params;
  params.weights = Eigen::MatrixXd::Zero(kNumClasses, d);
  params.bias = Eigen::VectorXd::Constant(kNumClasses, -std::numeric_limits<double>::infinity());
  const Eigen::Map<const Eigen::MatrixXd> wmat(theta.data(), k, d);
  for (Eigen::Index j = 0; j < k; ++j) {
    params.weights.row(classes[static_cast<std::size_t>(j)]) = wmat.row(j);
    params.bias(classes[static_cast<std::size_t>(j)]) = theta(k * d + j);
  }

  TrainedModel model;
  model.spec.params = LogRegParams{c};
  model.parameters = std::move(params);
  return model;
}

}  // namespace sbt::models
