#pragma once

#include <functional>
#include <string>
#include <vector>

#include "timedit/errors.hpp"

namespace timedit {

struct BiasObservation {
  std::string profession;
  double female_fraction = 0.0;  // F_p, percent in [0, 100]
};

// |F_p - 50| / 50
double delta_p(double female_fraction_percent);

struct BiasReport {
  std::vector<double> per_profession_delta;
  double delta_mean = 0.0;
  double delta_std = 0.0;  // sample std across professions; 0 for one entry
};

BiasReport aggregate_delta(const std::vector<BiasObservation>& observations);

// Calibration of the regularization strength against a fraction oracle. The
// oracle maps lambda to a percentage that is assumed non-increasing in lambda
// (callers flip female fraction to the non-stereotypical fraction when
// needed); the target is 50.
struct SearchConfig {
  double lambda_low = 1e-4;
  double lambda_high = 1e8;
  int max_iterations = 30;
  double tolerance = 0.1;        // target bound on delta_p
  double log_precision = 1e-3;   // bracket width (log10) considered resolved
  int samples_per_probe = 3;     // oracle calls averaged per probe
  std::function<double(double)> oracle;
};

struct Probe {
  double lambda = 0.0;
  double fraction = 0.0;
  double delta = 0.0;
};

struct SearchResult {
  double lambda_p = 0.0;
  BiasObservation achieved;
  bool converged = false;
  // Set when probe history rises with lambda by more than a 5-point band;
  // stochastic oracles may wiggle, so this warns rather than fails.
  bool non_monotone_warning = false;
  int iterations_used = 0;
  std::vector<Probe> probes;
};

// Bisection in log10(lambda). Probes are refined until the bracket is
// narrower than log_precision and the best probe meets the tolerance, or the
// iteration budget runs out; the best-delta probe seen is always returned.
SearchResult search_lambda(const SearchConfig& config);

}  // namespace timedit
