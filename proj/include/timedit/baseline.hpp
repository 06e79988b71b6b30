#pragma once

#include "timedit/linalg.hpp"

namespace timedit {

// Full-batch gradient descent on the ridge objective. Exists to cross-check
// the closed-form solve and to mirror finetuning-with-weight-decay at desk
// scale.
struct OptimizerConfig {
  // <= 0 selects a safe rate 0.9 / L, with L = 2 (lambda + lmax(sum c c^T))
  // estimated by power iteration.
  double learning_rate = 0.0;
  int iterations = 10000;
  double weight_decay = 0.0;  // decoupled decay toward zero
  double convergence_tolerance = 1e-10;
};

struct GdResult {
  Matrix solution;
  double final_loss = 0.0;
  int iterations_used = 0;
};

GdResult gd_minimize(const RidgeProblem& problem, const OptimizerConfig& config,
                     const Matrix& start);

// || gd - closed_form ||_F / (1 + || closed_form ||_F), starting gd from the
// original matrix.
double compare_closed_form(const RidgeProblem& problem, const OptimizerConfig& config);

// Analytic gradient of ridge_loss at w: 2 sum (w c_i - t_i) c_i^T + 2 lambda (w - W0).
Matrix ridge_gradient(const RidgeProblem& problem, const Matrix& w);

// Largest eigenvalue of a symmetric PSD matrix by power iteration.
double power_iteration_lmax(const Matrix& sym, int iterations = 100);

double safe_learning_rate(const RidgeProblem& problem);

}  // namespace timedit
