#include "timedit/baseline.hpp"

#include <cmath>

namespace timedit {

Matrix ridge_gradient(const RidgeProblem& problem, const Matrix& w) {
  Matrix grad = scale(sub(w, problem.original), 2.0 * problem.lambda);
  for (std::size_t i = 0; i < problem.inputs.size(); ++i) {
    const Vec& c = problem.inputs[i];
    const Vec mapped = matvec(w, c);
    for (std::size_t r = 0; r < w.rows(); ++r) {
      const double res = 2.0 * (mapped[r] - problem.targets[i][r]);
      if (res == 0.0) continue;
      for (std::size_t j = 0; j < w.cols(); ++j) grad(r, j) += res * c[j];
    }
  }
  return grad;
}

double power_iteration_lmax(const Matrix& sym, int iterations) {
  const std::size_t n = sym.rows();
  if (n == 0) return 0.0;
  Vec v(n, 1.0 / std::sqrt(static_cast<double>(n)));
  double eig = 0.0;
  for (int it = 0; it < iterations; ++it) {
    Vec next = matvec(sym, v);
    const double norm = norm2(next);
    if (norm == 0.0) return 0.0;
    for (double& x : next) x /= norm;
    eig = dot(next, matvec(sym, next));
    v = std::move(next);
  }
  return eig;
}

double safe_learning_rate(const RidgeProblem& problem) {
  GramAccumulator acc(problem.original.rows(), problem.original.cols());
  for (std::size_t i = 0; i < problem.inputs.size(); ++i)
    acc.add(problem.inputs[i], problem.targets[i]);
  const double lmax = power_iteration_lmax(acc.gram());
  const double lipschitz_bound = 2.0 * (problem.lambda + lmax);
  return 0.9 / lipschitz_bound;
}

GdResult gd_minimize(const RidgeProblem& problem, const OptimizerConfig& config,
                     const Matrix& start) {
  problem.validate();
  if (!start.same_shape(problem.original))
    fail(ErrorCode::DimensionMismatch, "start shape != original shape");
  if (config.iterations < 1) fail(ErrorCode::BadRequest, "iterations must be >= 1");

  const double lr = config.learning_rate > 0.0 ? config.learning_rate
                                               : safe_learning_rate(problem);
  Matrix w = start;
  for (int it = 1; it <= config.iterations; ++it) {
    const double loss = ridge_loss(problem, w);
    if (!std::isfinite(loss)) fail(ErrorCode::Diverged, "loss became non-finite");
    const Matrix grad = ridge_gradient(problem, w);
    if (frobenius_norm(grad) < config.convergence_tolerance * (1.0 + loss))
      return {std::move(w), loss, it};
    for (std::size_t i = 0; i < w.size(); ++i) {
      w.values()[i] -= lr * grad.values()[i] + lr * config.weight_decay * w.values()[i];
    }
  }
  const double final_loss = ridge_loss(problem, w);
  if (!std::isfinite(final_loss)) fail(ErrorCode::Diverged, "loss became non-finite");
  return {std::move(w), final_loss, config.iterations};
}

double compare_closed_form(const RidgeProblem& problem, const OptimizerConfig& config) {
  const GdResult gd = gd_minimize(problem, config, problem.original);
  const Matrix closed = ridge_closed_form(problem);
  const Matrix diff = sub(gd.solution, closed);
  return frobenius_norm(diff) / (1.0 + frobenius_norm(closed));
}

}  // namespace timedit
