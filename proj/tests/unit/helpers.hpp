#pragma once

#include <doctest.h>

#include "timedit/errors.hpp"
#include "timedit/linalg.hpp"
#include "timedit/rng.hpp"

// Asserts that expr throws a timedit::Error carrying the given code.
#define CHECK_FAILS_WITH(expr, expected_code)                        \
  do {                                                               \
    bool thrown = false;                                             \
    try {                                                            \
      (void)(expr);                                                  \
    } catch (const timedit::Error& e) {                              \
      thrown = true;                                                 \
      CHECK(e.code() == (expected_code));                            \
    }                                                                \
    CHECK_MESSAGE(thrown, "expected " #expr " to throw");            \
  } while (0)

namespace testutil {

inline timedit::Matrix random_matrix(timedit::Rng& rng, std::size_t rows, std::size_t cols) {
  timedit::Matrix m(rows, cols);
  for (double& v : m.values()) v = rng.next_normal();
  return m;
}

inline timedit::Vec random_vec(timedit::Rng& rng, std::size_t dim) {
  timedit::Vec v(dim);
  for (double& x : v) x = rng.next_normal();
  return v;
}

inline timedit::RidgeProblem random_problem(timedit::Rng& rng, std::size_t max_dim = 16,
                                            std::size_t max_pairs = 8, double lambda = 0.1) {
  using timedit::RidgeProblem;
  const std::size_t out = 1 + rng.next_u64() % max_dim;
  const std::size_t cols = 1 + rng.next_u64() % max_dim;
  const std::size_t pairs = 1 + rng.next_u64() % max_pairs;
  RidgeProblem problem;
  problem.original = random_matrix(rng, out, cols);
  for (std::size_t i = 0; i < pairs; ++i) {
    problem.inputs.push_back(random_vec(rng, cols));
    problem.targets.push_back(random_vec(rng, out));
  }
  problem.lambda = lambda;
  return problem;
}

// Central finite differences of ridge_loss; the loss is quadratic, so this is
// exact up to round-off and serves as the independent gradient oracle.
inline timedit::Matrix fd_gradient(const timedit::RidgeProblem& problem,
                                   const timedit::Matrix& w, double h = 1e-6) {
  timedit::Matrix grad(w.rows(), w.cols());
  timedit::Matrix probe = w;
  for (std::size_t i = 0; i < w.size(); ++i) {
    const double original = probe.values()[i];
    probe.values()[i] = original + h;
    const double up = timedit::ridge_loss(problem, probe);
    probe.values()[i] = original - h;
    const double down = timedit::ridge_loss(problem, probe);
    probe.values()[i] = original;
    grad.values()[i] = (up - down) / (2.0 * h);
  }
  return grad;
}

}  // namespace testutil
