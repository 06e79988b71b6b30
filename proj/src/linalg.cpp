#include "timedit/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <string>
#include <thread>

namespace timedit {

namespace {

// Neumaier variant of Kahan summation on a flat buffer.
inline void compensated_add(double value, double& sum, double& comp) {
  const double t = sum + value;
  if (std::fabs(sum) >= std::fabs(value)) {
    comp += (sum - t) + value;
  } else {
    comp += (value - t) + sum;
  }
  sum = t;
}

std::size_t configured_threads() {
  if (const char* env = std::getenv("TIMEDIT_THREADS")) {
    const long n = std::strtol(env, nullptr, 10);
    if (n >= 1) return static_cast<std::size_t>(n);
  }
  const unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : hw;
}

}  // namespace

void RidgeProblem::validate() const {
  if (inputs.empty()) fail(ErrorCode::DimensionMismatch, "ridge problem needs at least one pair");
  if (inputs.size() != targets.size())
    fail(ErrorCode::DimensionMismatch, "input/target count mismatch");
  if (!(lambda >= kMinLambda))
    fail(ErrorCode::InvalidLambda,
         "lambda must be >= " + std::to_string(kMinLambda));
  const std::size_t c = original.cols();
  const std::size_t out = original.rows();
  for (const Vec& v : inputs)
    if (v.size() != c) fail(ErrorCode::DimensionMismatch, "input dim != original cols");
  for (const Vec& v : targets)
    if (v.size() != out) fail(ErrorCode::DimensionMismatch, "target dim != original rows");
  if (!all_finite(original)) fail(ErrorCode::NonFiniteValue, "original matrix not finite");
}

CholeskyFactor::CholeskyFactor(const Matrix& a) {
  if (a.rows() != a.cols()) fail(ErrorCode::DimensionMismatch, "cholesky needs a square matrix");
  const std::size_t n = a.rows();

  double asym = 0.0;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j)
      asym = std::max(asym, std::fabs(a(i, j) - a(j, i)));
  if (asym > 1e-10 * (1.0 + max_abs(a)))
    fail(ErrorCode::NotSymmetric, "matrix asymmetry exceeds tolerance");

  // Factor the symmetrized matrix; accumulated round-off in callers must not
  // leak into the pivots.
  lower_ = Matrix(n, n);
  for (std::size_t j = 0; j < n; ++j) {
    double diag = a(j, j);
    for (std::size_t k = 0; k < j; ++k) diag -= lower_(j, k) * lower_(j, k);
    if (!(diag > 0.0))
      fail(ErrorCode::NotPositiveDefinite,
           "non-positive pivot at index " + std::to_string(j));
    const double ljj = std::sqrt(diag);
    lower_(j, j) = ljj;
    for (std::size_t i = j + 1; i < n; ++i) {
      double acc = 0.5 * (a(i, j) + a(j, i));
      for (std::size_t k = 0; k < j; ++k) acc -= lower_(i, k) * lower_(j, k);
      lower_(i, j) = acc / ljj;
    }
  }
}

void CholeskyFactor::solve_column(const Matrix& b, Matrix& x, std::size_t col) const {
  const std::size_t n = dim();
  Vec y(n);
  for (std::size_t i = 0; i < n; ++i) {
    double acc = b(i, col);
    for (std::size_t k = 0; k < i; ++k) acc -= lower_(i, k) * y[k];
    y[i] = acc / lower_(i, i);
  }
  for (std::size_t ri = n; ri-- > 0;) {
    double acc = y[ri];
    for (std::size_t k = ri + 1; k < n; ++k) acc -= lower_(k, ri) * x(k, col);
    x(ri, col) = acc / lower_(ri, ri);
  }
}

Matrix CholeskyFactor::solve(const Matrix& b) const {
  if (b.rows() != dim()) fail(ErrorCode::DimensionMismatch, "rhs rows != matrix dim");
  Matrix x(b.rows(), b.cols());

  const std::size_t threads = std::min(configured_threads(), b.cols());
  if (b.cols() >= 256 && threads > 1) {
    std::vector<std::thread> pool;
    pool.reserve(threads);
    for (std::size_t t = 0; t < threads; ++t) {
      pool.emplace_back([&, t] {
        for (std::size_t col = t; col < b.cols(); col += threads)
          solve_column(b, x, col);
      });
    }
    for (auto& th : pool) th.join();
  } else {
    for (std::size_t col = 0; col < b.cols(); ++col) solve_column(b, x, col);
  }
  return x;
}

Vec CholeskyFactor::solve(const Vec& b) const {
  Matrix col(b.size(), 1);
  for (std::size_t i = 0; i < b.size(); ++i) col(i, 0) = b[i];
  const Matrix x = solve(col);
  Vec out(b.size());
  for (std::size_t i = 0; i < b.size(); ++i) out[i] = x(i, 0);
  return out;
}

Matrix spd_solve(const Matrix& a, const Matrix& b) {
  if (a.rows() != b.rows()) fail(ErrorCode::DimensionMismatch, "A and B row counts differ");
  return CholeskyFactor(a).solve(b);
}

GramAccumulator::GramAccumulator(std::size_t target_dim, std::size_t input_dim)
    : target_dim_(target_dim),
      input_dim_(input_dim),
      cross_sum_(target_dim * input_dim, 0.0),
      cross_comp_(target_dim * input_dim, 0.0),
      gram_sum_(input_dim * input_dim, 0.0),
      gram_comp_(input_dim * input_dim, 0.0) {}

void GramAccumulator::add(const Vec& input, const Vec& target) {
  if (input.size() != input_dim_ || target.size() != target_dim_)
    fail(ErrorCode::DimensionMismatch, "accumulator pair dims");
  for (std::size_t i = 0; i < target_dim_; ++i) {
    const double ti = target[i];
    for (std::size_t j = 0; j < input_dim_; ++j) {
      const std::size_t idx = i * input_dim_ + j;
      compensated_add(ti * input[j], cross_sum_[idx], cross_comp_[idx]);
    }
  }
  for (std::size_t i = 0; i < input_dim_; ++i) {
    const double ci = input[i];
    for (std::size_t j = 0; j < input_dim_; ++j) {
      const std::size_t idx = i * input_dim_ + j;
      compensated_add(ci * input[j], gram_sum_[idx], gram_comp_[idx]);
    }
  }
  ++count_;
}

Matrix GramAccumulator::cross() const {
  Matrix out(target_dim_, input_dim_);
  for (std::size_t i = 0; i < out.size(); ++i)
    out.values()[i] = cross_sum_[i] + cross_comp_[i];
  return out;
}

Matrix GramAccumulator::gram() const {
  Matrix out(input_dim_, input_dim_);
  for (std::size_t i = 0; i < out.size(); ++i)
    out.values()[i] = gram_sum_[i] + gram_comp_[i];
  return out;
}

std::pair<Matrix, Matrix> gram_accumulate(const std::vector<Vec>& inputs,
                                          const std::vector<Vec>& targets) {
  if (inputs.size() != targets.size())
    fail(ErrorCode::DimensionMismatch, "input/target count mismatch");
  if (inputs.empty()) fail(ErrorCode::DimensionMismatch, "empty pair list");
  GramAccumulator acc(targets.front().size(), inputs.front().size());
  for (std::size_t i = 0; i < inputs.size(); ++i) acc.add(inputs[i], targets[i]);
  return {acc.cross(), acc.gram()};
}

double ridge_loss(const RidgeProblem& problem, const Matrix& candidate) {
  problem.validate();
  if (!candidate.same_shape(problem.original))
    fail(ErrorCode::DimensionMismatch, "candidate shape != original shape");
  double loss = 0.0;
  for (std::size_t i = 0; i < problem.inputs.size(); ++i) {
    const Vec mapped = matvec(candidate, problem.inputs[i]);
    for (std::size_t r = 0; r < mapped.size(); ++r) {
      const double d = mapped[r] - problem.targets[i][r];
      loss += d * d;
    }
  }
  const Matrix dev = sub(candidate, problem.original);
  const double fro = frobenius_norm(dev);
  return loss + problem.lambda * fro * fro;
}

Matrix regularized_gram(const Matrix& gram, double lambda) {
  Matrix a = gram;
  for (std::size_t i = 0; i < a.rows(); ++i) a(i, i) += lambda;
  return a;
}

Matrix ridge_solve(const Matrix& original, const Matrix& cross,
                   const CholeskyFactor& regularized_gram, double lambda) {
  if (!original.same_shape(cross))
    fail(ErrorCode::DimensionMismatch, "cross shape != original shape");
  if (regularized_gram.dim() != original.cols())
    fail(ErrorCode::DimensionMismatch, "gram dim != original cols");
  // W' (lambda I + G) = lambda W + cross, solved as A X^T = N^T with A
  // symmetric.
  const Matrix numerator = add(scale(original, lambda), cross);
  return transpose(regularized_gram.solve(transpose(numerator)));
}

Matrix ridge_closed_form(const RidgeProblem& problem) {
  problem.validate();
  GramAccumulator acc(problem.original.rows(), problem.original.cols());
  for (std::size_t i = 0; i < problem.inputs.size(); ++i)
    acc.add(problem.inputs[i], problem.targets[i]);
  const CholeskyFactor factor(regularized_gram(acc.gram(), problem.lambda));
  return ridge_solve(problem.original, acc.cross(), factor, problem.lambda);
}

}  // namespace timedit
