#include <doctest.h>

#include "helpers.hpp"
#include "timedit/baseline.hpp"

using namespace timedit;
using testutil::random_problem;
using testutil::random_vec;

namespace {

RidgeProblem two_by_two_instance() {
  RidgeProblem problem;
  problem.original = Matrix::identity(2);
  problem.inputs = {{1.0, 0.0}};
  problem.targets = {{0.0, 1.0}};
  problem.lambda = 1.0;
  return problem;
}

}  // namespace

TEST_CASE("gd_minimize: already-optimal start stops at iteration one") {
  Rng rng(21);
  RidgeProblem problem;
  problem.original = testutil::random_matrix(rng, 4, 5);
  for (int i = 0; i < 3; ++i) {
    problem.inputs.push_back(random_vec(rng, 5));
    problem.targets.push_back(matvec(problem.original, problem.inputs.back()));
  }
  problem.lambda = 0.5;
  const GdResult result = gd_minimize(problem, {}, problem.original);
  CHECK(result.iterations_used == 1);
  CHECK(result.final_loss == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("gd_minimize: converges to the known two-by-two minimizer") {
  OptimizerConfig config;
  config.learning_rate = 0.1;
  config.iterations = 10000;
  config.convergence_tolerance = 1e-12;
  const RidgeProblem problem = two_by_two_instance();
  const GdResult result = gd_minimize(problem, config, problem.original);
  const Matrix expected = Matrix::from_rows({{0.5, 0.0}, {0.5, 1.0}});
  CHECK(max_abs_diff(result.solution, expected) <= 1e-5);
}

TEST_CASE("gd_minimize: oversized learning rate diverges") {
  OptimizerConfig config;
  config.learning_rate = 10.0;
  config.iterations = 10000;
  const RidgeProblem problem = two_by_two_instance();
  CHECK_FAILS_WITH(gd_minimize(problem, config, problem.original), ErrorCode::Diverged);
}

TEST_CASE("gd_minimize: loss is non-increasing under the safe rate") {
  Rng rng(22);
  const RidgeProblem problem = random_problem(rng, 8, 5, 0.2);
  OptimizerConfig config;
  config.convergence_tolerance = 0.0;  // never stop early
  double previous = std::numeric_limits<double>::infinity();
  for (int iters = 1; iters <= 40; ++iters) {
    config.iterations = iters;
    const GdResult result = gd_minimize(problem, config, problem.original);
    CHECK(result.final_loss <= previous + 1e-12);
    previous = result.final_loss;
  }
}

TEST_CASE("gd_minimize: analytic gradient matches finite differences") {
  Rng rng(23);
  for (int trial = 0; trial < 10; ++trial) {
    const RidgeProblem problem = random_problem(rng, 6, 4, 0.4);
    const Matrix w = testutil::random_matrix(rng, problem.original.rows(),
                                             problem.original.cols());
    const Matrix analytic = ridge_gradient(problem, w);
    const Matrix numeric = testutil::fd_gradient(problem, w);
    const double scale = 1.0 + max_abs(analytic);
    CHECK(max_abs_diff(analytic, numeric) <= 1e-6 * scale);
  }
}

TEST_CASE("compare_closed_form: well-conditioned instances agree to 1e-4") {
  Rng rng(24);
  OptimizerConfig config;
  config.iterations = 200000;
  config.convergence_tolerance = 1e-11;
  for (int trial = 0; trial < 5; ++trial) {
    const RidgeProblem problem = random_problem(rng, 8, 5, 1.0);
    CHECK(compare_closed_form(problem, config) <= 1e-4);
  }
}

TEST_CASE("compare_closed_form: strongly convex instance agrees to 1e-6") {
  Rng rng(25);
  const RidgeProblem problem = random_problem(rng, 8, 5, 1e6);
  OptimizerConfig config;
  config.iterations = 50000;
  config.convergence_tolerance = 1e-13;
  CHECK(compare_closed_form(problem, config) <= 1e-6);
}

TEST_CASE("compare_closed_form: identity problem agrees to 1e-10") {
  Rng rng(26);
  RidgeProblem problem;
  problem.original = testutil::random_matrix(rng, 5, 5);
  for (int i = 0; i < 4; ++i) {
    problem.inputs.push_back(random_vec(rng, 5));
    problem.targets.push_back(matvec(problem.original, problem.inputs.back()));
  }
  problem.lambda = 0.3;
  CHECK(compare_closed_form(problem, {}) <= 1e-10);
}

TEST_CASE("power_iteration_lmax: matches the dominant eigenvalue of a diagonal") {
  Matrix diag(3, 3);
  diag(0, 0) = 0.5;
  diag(1, 1) = 4.0;
  diag(2, 2) = 2.0;
  CHECK(power_iteration_lmax(diag) == doctest::Approx(4.0).epsilon(1e-8));
}
