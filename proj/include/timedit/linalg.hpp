#pragma once

#include <cstddef>
#include <utility>
#include <vector>

#include "timedit/matrix.hpp"

namespace timedit {

// Solutions below this regularization strength are rejected outright; the
// closed form degrades long before, but this is the hard floor.
inline constexpr double kMinLambda = 1e-12;

// One half of the edit objective: a set of input vectors that must map to
// target vectors under the unknown matrix, anchored to the original matrix
// by a Frobenius penalty of strength lambda.
struct RidgeProblem {
  Matrix original;            // out x c
  std::vector<Vec> inputs;    // each of dim c
  std::vector<Vec> targets;   // each of dim out
  double lambda = 0.0;

  void validate() const;
};

// LL^T factorization of a symmetric positive-definite matrix. The input is
// symmetrized as (A + A^T)/2 before factorizing; asymmetry beyond a 1e-10
// relative tolerance is rejected.
class CholeskyFactor {
 public:
  explicit CholeskyFactor(const Matrix& a);

  std::size_t dim() const { return lower_.rows(); }

  // Solves A x = b for each column of b. Columns are independent, so large
  // right-hand sides are split across threads; per-column arithmetic is
  // identical either way and results do not depend on scheduling.
  Matrix solve(const Matrix& b) const;
  Vec solve(const Vec& b) const;

 private:
  void solve_column(const Matrix& b, Matrix& x, std::size_t col) const;
  Matrix lower_;
};

Matrix spd_solve(const Matrix& a, const Matrix& b);

// Accumulates sum_i target_i input_i^T and sum_i input_i input_i^T with
// Neumaier-compensated sums, in call order. Multi-edit pools several edits
// into one accumulator before a single solve.
class GramAccumulator {
 public:
  GramAccumulator(std::size_t target_dim, std::size_t input_dim);

  void add(const Vec& input, const Vec& target);

  Matrix cross() const;  // target_dim x input_dim
  Matrix gram() const;   // input_dim x input_dim
  std::size_t count() const { return count_; }
  std::size_t input_dim() const { return input_dim_; }
  std::size_t target_dim() const { return target_dim_; }

 private:
  std::size_t target_dim_;
  std::size_t input_dim_;
  std::size_t count_ = 0;
  Vec cross_sum_, cross_comp_;
  Vec gram_sum_, gram_comp_;
};

std::pair<Matrix, Matrix> gram_accumulate(const std::vector<Vec>& inputs,
                                          const std::vector<Vec>& targets);

// sum_i ||candidate c_i - t_i||^2 + lambda ||candidate - original||_F^2
double ridge_loss(const RidgeProblem& problem, const Matrix& candidate);

// The unique minimizer (lambda W + sum t c^T)(lambda I + sum c c^T)^{-1},
// evaluated by a symmetric solve on the transposed system rather than an
// explicit inverse.
Matrix ridge_closed_form(const RidgeProblem& problem);

// Same solve from already-pooled sums; the factor of (lambda I + gram) can be
// shared across every matrix edited with the same context.
Matrix ridge_solve(const Matrix& original, const Matrix& cross,
                   const CholeskyFactor& regularized_gram, double lambda);

Matrix regularized_gram(const Matrix& gram, double lambda);

}  // namespace timedit
