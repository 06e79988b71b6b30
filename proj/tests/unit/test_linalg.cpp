#include <algorithm>
#include <doctest.h>

#include "helpers.hpp"
#include "timedit/linalg.hpp"

using namespace timedit;
using testutil::random_problem;
using testutil::random_vec;

TEST_CASE("spd_solve: identity returns the right-hand side") {
  const Matrix a = Matrix::identity(2);
  const Matrix b = Matrix::from_rows({{3.0, -1.0}, {0.5, 2.0}});
  const Matrix x = spd_solve(a, b);
  CHECK(max_abs_diff(x, b) == doctest::Approx(0.0).epsilon(1e-14));
}

TEST_CASE("spd_solve: diagonal system") {
  const Matrix a = Matrix::from_rows({{2.0, 0.0}, {0.0, 1.0}});
  const Matrix b = Matrix::from_rows({{1.0}, {1.0}});
  const Matrix x = spd_solve(a, b);
  CHECK(x(0, 0) == doctest::Approx(0.5));
  CHECK(x(1, 0) == doctest::Approx(1.0));
}

TEST_CASE("spd_solve: indefinite matrix is rejected") {
  // eigenvalues 3 and -1
  const Matrix a = Matrix::from_rows({{1.0, 2.0}, {2.0, 1.0}});
  const Matrix b = Matrix::from_rows({{1.0}, {1.0}});
  CHECK_FAILS_WITH(spd_solve(a, b), ErrorCode::NotPositiveDefinite);
}

TEST_CASE("spd_solve: asymmetric and mismatched inputs are rejected") {
  const Matrix bad = Matrix::from_rows({{1.0, 0.5}, {0.0, 1.0}});
  CHECK_FAILS_WITH(spd_solve(bad, Matrix::identity(2)), ErrorCode::NotSymmetric);
  CHECK_FAILS_WITH(spd_solve(Matrix::identity(2), Matrix(3, 1)), ErrorCode::DimensionMismatch);
  CHECK_FAILS_WITH(spd_solve(Matrix(2, 3), Matrix(2, 1)), ErrorCode::DimensionMismatch);
}

TEST_CASE("spd_solve: residual on random SPD systems") {
  Rng rng(101);
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t n = 1 + rng.next_u64() % 12;
    GramAccumulator acc(0, n);
    for (std::size_t i = 0; i < n + 2; ++i) acc.add(random_vec(rng, n), Vec{});
    const Matrix a = regularized_gram(acc.gram(), 0.5);
    const Matrix b = testutil::random_matrix(rng, n, 3);
    const Matrix x = spd_solve(a, b);
    const Matrix residual = sub(matmul(a, x), b);
    CHECK(frobenius_norm(residual) <= 1e-8 * frobenius_norm(b));
  }
}

TEST_CASE("ridge_loss: zero at exact fit with zero deviation") {
  Rng rng(7);
  RidgeProblem problem;
  problem.original = testutil::random_matrix(rng, 3, 4);
  for (int i = 0; i < 5; ++i) {
    problem.inputs.push_back(random_vec(rng, 4));
    problem.targets.push_back(matvec(problem.original, problem.inputs.back()));
  }
  problem.lambda = 0.7;
  CHECK(ridge_loss(problem, problem.original) == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("ridge_loss: hand-computed two-by-two value") {
  RidgeProblem problem;
  problem.original = Matrix::identity(2);
  problem.inputs = {{1.0, 0.0}};
  problem.targets = {{0.0, 1.0}};
  problem.lambda = 1.0;
  const Matrix candidate = Matrix::from_rows({{0.5, 0.0}, {0.5, 1.0}});
  // residual (0.5, -0.5) contributes 0.5; deviation Frobenius^2 is 0.5
  CHECK(ridge_loss(problem, candidate) == doctest::Approx(1.0));
}

TEST_CASE("ridge_loss: deviation term vanishes at the original matrix") {
  Rng rng(8);
  RidgeProblem problem;
  problem.original = testutil::random_matrix(rng, 3, 3);
  problem.inputs = {random_vec(rng, 3)};
  problem.targets = {random_vec(rng, 3)};
  problem.lambda = 2.5;
  const Vec mapped = matvec(problem.original, problem.inputs[0]);
  double expected = 0.0;
  for (std::size_t i = 0; i < mapped.size(); ++i) {
    const double d = mapped[i] - problem.targets[0][i];
    expected += d * d;
  }
  CHECK(ridge_loss(problem, problem.original) == doctest::Approx(expected));
}

TEST_CASE("ridge_loss: shape mismatch is rejected") {
  RidgeProblem problem;
  problem.original = Matrix::identity(2);
  problem.inputs = {{1.0, 0.0}};
  problem.targets = {{0.0, 1.0}};
  problem.lambda = 1.0;
  CHECK_FAILS_WITH(ridge_loss(problem, Matrix(3, 2)), ErrorCode::DimensionMismatch);
}

TEST_CASE("ridge_closed_form: consistent targets return the original matrix") {
  Rng rng(9);
  for (double lambda : {1e-3, 0.1, 10.0}) {
    RidgeProblem problem;
    problem.original = testutil::random_matrix(rng, 5, 6);
    for (int i = 0; i < 4; ++i) {
      problem.inputs.push_back(random_vec(rng, 6));
      problem.targets.push_back(matvec(problem.original, problem.inputs.back()));
    }
    problem.lambda = lambda;
    const Matrix solution = ridge_closed_form(problem);
    CHECK(max_abs_diff(solution, problem.original) <= 1e-10);
  }
}

TEST_CASE("ridge_closed_form: two-by-two instance matches the frozen oracle value") {
  // Frozen from the gradient-descent oracle (see test_baseline.cpp, which
  // re-derives it): the minimizer is [[0.5, 0], [0.5, 1]].
  RidgeProblem problem;
  problem.original = Matrix::identity(2);
  problem.inputs = {{1.0, 0.0}};
  problem.targets = {{0.0, 1.0}};
  problem.lambda = 1.0;
  const Matrix solution = ridge_closed_form(problem);
  const Matrix expected = Matrix::from_rows({{0.5, 0.0}, {0.5, 1.0}});
  CHECK(max_abs_diff(solution, expected) <= 1e-12);
}

TEST_CASE("ridge_closed_form: huge lambda keeps the original matrix") {
  Rng rng(10);
  RidgeProblem problem;
  problem.original = testutil::random_matrix(rng, 4, 4);
  for (int i = 0; i < 3; ++i) {
    problem.inputs.push_back(random_vec(rng, 4));
    problem.targets.push_back(random_vec(rng, 4));
  }
  problem.lambda = 1e12;
  const Matrix solution = ridge_closed_form(problem);
  CHECK(frobenius_norm(sub(solution, problem.original)) <
        1e-9 * frobenius_norm(problem.original));
}

TEST_CASE("ridge_closed_form: lambda below the floor is rejected") {
  RidgeProblem problem;
  problem.original = Matrix::identity(2);
  problem.inputs = {{1.0, 0.0}};
  problem.targets = {{0.0, 1.0}};
  problem.lambda = 1e-13;
  CHECK_FAILS_WITH(ridge_closed_form(problem), ErrorCode::InvalidLambda);
}

TEST_CASE("gram_accumulate: single pair gives plain outer products") {
  const auto [cross, gram] = gram_accumulate({{1.0, 0.0}}, {{0.0, 1.0}});
  CHECK(cross == Matrix::from_rows({{0.0, 0.0}, {1.0, 0.0}}));
  CHECK(gram == Matrix::from_rows({{1.0, 0.0}, {0.0, 0.0}}));
}

TEST_CASE("gram_accumulate: duplicated pair doubles the sums") {
  Rng rng(11);
  const Vec c = random_vec(rng, 5);
  const Vec t = random_vec(rng, 3);
  const auto [cross1, gram1] = gram_accumulate({c}, {t});
  const auto [cross2, gram2] = gram_accumulate({c, c}, {t, t});
  CHECK(max_abs_diff(cross2, scale(cross1, 2.0)) <= 1e-15);
  CHECK(max_abs_diff(gram2, scale(gram1, 2.0)) <= 1e-15);
}

TEST_CASE("gram_accumulate: matches a naive double loop") {
  Rng rng(12);
  std::vector<Vec> inputs, targets;
  for (int i = 0; i < 5; ++i) {
    inputs.push_back(random_vec(rng, 4));
    targets.push_back(random_vec(rng, 6));
  }
  const auto [cross, gram] = gram_accumulate(inputs, targets);

  Matrix cross_naive(6, 4), gram_naive(4, 4);
  for (std::size_t p = 0; p < inputs.size(); ++p) {
    for (std::size_t i = 0; i < 6; ++i)
      for (std::size_t j = 0; j < 4; ++j) cross_naive(i, j) += targets[p][i] * inputs[p][j];
    for (std::size_t i = 0; i < 4; ++i)
      for (std::size_t j = 0; j < 4; ++j) gram_naive(i, j) += inputs[p][i] * inputs[p][j];
  }
  CHECK(max_abs_diff(cross, cross_naive) <= 1e-12);
  CHECK(max_abs_diff(gram, gram_naive) <= 1e-12);
}

TEST_CASE("property: finite-difference gradient vanishes at the solution") {
  Rng rng(13);
  for (int trial = 0; trial < 25; ++trial) {
    const double lambda = std::pow(10.0, -2.0 + 4.0 * rng.next_unit());
    const RidgeProblem problem = random_problem(rng, 16, 8, lambda);
    const Matrix solution = ridge_closed_form(problem);
    const double loss = ridge_loss(problem, solution);
    const Matrix grad = testutil::fd_gradient(problem, solution);
    CHECK(max_abs(grad) <= 1e-5 * (1.0 + loss));
  }
}

TEST_CASE("property: solution beats the original and random perturbations") {
  Rng rng(14);
  for (int trial = 0; trial < 10; ++trial) {
    const RidgeProblem problem = random_problem(rng, 12, 6, 0.3);
    const Matrix solution = ridge_closed_form(problem);
    const double best = ridge_loss(problem, solution);
    CHECK(best <= ridge_loss(problem, problem.original) + 1e-12);
    for (int p = 0; p < 100; ++p) {
      Matrix perturbed = solution;
      for (double& v : perturbed.values()) v += 0.1 * rng.next_normal();
      CHECK(best <= ridge_loss(problem, perturbed) + 1e-12);
    }
  }
}

TEST_CASE("property: deviation from the original is non-increasing in lambda") {
  Rng rng(15);
  for (int trial = 0; trial < 10; ++trial) {
    RidgeProblem problem = random_problem(rng, 10, 6, 1.0);
    double previous = std::numeric_limits<double>::infinity();
    for (double lambda = 1e-2; lambda <= 1e6; lambda *= 10.0) {
      problem.lambda = lambda;
      const double deviation = frobenius_norm(sub(ridge_closed_form(problem), problem.original));
      CHECK(deviation <= previous + 1e-12);
      previous = deviation;
    }
  }
}

TEST_CASE("property: pair order does not change the solution") {
  Rng rng(16);
  RidgeProblem problem = random_problem(rng, 10, 8, 0.2);
  const Matrix base = ridge_closed_form(problem);
  for (int shuffle = 0; shuffle < 5; ++shuffle) {
    RidgeProblem permuted = problem;
    for (std::size_t i = permuted.inputs.size(); i > 1; --i) {
      const std::size_t j = rng.next_u64() % i;
      std::swap(permuted.inputs[i - 1], permuted.inputs[j]);
      std::swap(permuted.targets[i - 1], permuted.targets[j]);
    }
    CHECK(max_abs_diff(ridge_closed_form(permuted), base) <= 1e-12);
  }
}
