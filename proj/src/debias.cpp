#include "timedit/debias.hpp"

#include <cmath>

namespace timedit {

double delta_p(double female_fraction_percent) {
  if (!(female_fraction_percent >= 0.0 && female_fraction_percent <= 100.0))
    fail(ErrorCode::OutOfRange, "female fraction must lie in [0, 100]");
  return std::fabs(female_fraction_percent - 50.0) / 50.0;
}

BiasReport aggregate_delta(const std::vector<BiasObservation>& observations) {
  if (observations.empty()) fail(ErrorCode::Empty, "no bias observations");
  BiasReport report;
  report.per_profession_delta.reserve(observations.size());
  double sum = 0.0;
  for (const BiasObservation& obs : observations) {
    const double d = delta_p(obs.female_fraction);
    report.per_profession_delta.push_back(d);
    sum += d;
  }
  report.delta_mean = sum / static_cast<double>(observations.size());
  if (observations.size() > 1) {
    double variance = 0.0;
    for (double d : report.per_profession_delta)
      variance += (d - report.delta_mean) * (d - report.delta_mean);
    variance /= static_cast<double>(report.per_profession_delta.size() - 1);
    report.delta_std = std::sqrt(variance);
  }
  return report;
}

SearchResult search_lambda(const SearchConfig& config) {
  if (!(config.lambda_low > 0.0) || !(config.lambda_high > config.lambda_low))
    fail(ErrorCode::InvalidBracket, "need 0 < lambda_low < lambda_high");
  if (!(config.tolerance > 0.0 && config.tolerance < 1.0))
    fail(ErrorCode::InvalidBracket, "tolerance must lie in (0, 1)");
  if (config.max_iterations < 1)
    fail(ErrorCode::InvalidBracket, "max_iterations must be >= 1");
  if (config.samples_per_probe < 1)
    fail(ErrorCode::InvalidBracket, "samples_per_probe must be >= 1");
  if (!config.oracle) fail(ErrorCode::OracleFailure, "no oracle supplied");

  const auto probe_oracle = [&](double lambda) {
    double sum = 0.0;
    for (int i = 0; i < config.samples_per_probe; ++i) {
      double value = 0.0;
      try {
        value = config.oracle(lambda);
      } catch (const Error&) {
        throw;
      } catch (const std::exception& e) {
        fail(ErrorCode::OracleFailure, std::string("oracle raised: ") + e.what());
      }
      if (!std::isfinite(value) || value < 0.0 || value > 100.0)
        fail(ErrorCode::OracleFailure, "oracle must return a percent in [0, 100]");
      sum += value;
    }
    return sum / config.samples_per_probe;
  };

  double lo = std::log10(config.lambda_low);
  double hi = std::log10(config.lambda_high);

  SearchResult result;
  Probe best{0.0, 0.0, 2.0};
  while (result.iterations_used < config.max_iterations) {
    if ((hi - lo) <= config.log_precision && best.delta < config.tolerance) break;
    const double mid = 0.5 * (lo + hi);
    const double lambda = std::pow(10.0, mid);
    Probe probe;
    probe.lambda = lambda;
    probe.fraction = probe_oracle(lambda);
    probe.delta = std::fabs(probe.fraction - 50.0) / 50.0;
    result.probes.push_back(probe);
    ++result.iterations_used;
    if (probe.delta < best.delta) best = probe;
    // Assumed non-increasing in lambda: a fraction above target means the
    // edit is still too strong, so move the bracket's low end up.
    if (probe.fraction > 50.0) {
      lo = mid;
    } else {
      hi = mid;
    }
  }

  // Flag history that rises with lambda beyond a 5-point noise band.
  for (std::size_t i = 0; i < result.probes.size(); ++i) {
    for (std::size_t j = 0; j < result.probes.size(); ++j) {
      if (result.probes[i].lambda < result.probes[j].lambda &&
          result.probes[j].fraction > result.probes[i].fraction + 5.0)
        result.non_monotone_warning = true;
    }
  }

  result.lambda_p = best.lambda;
  result.achieved.female_fraction = best.fraction;
  result.converged = best.delta < config.tolerance;
  return result;
}

}  // namespace timedit
