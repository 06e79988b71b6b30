#pragma once

#include <string>
#include <vector>

#include "timedit/errors.hpp"

namespace timedit {

enum class PromptKind { Source, Positive, Negative };
enum class Label { SourceLabel, DestinationLabel };

// Per-seed classifications for one test prompt. All outcomes fed to a single
// aggregation must cover the same seed count.
struct TrialOutcome {
  std::string prompt_id;
  PromptKind kind = PromptKind::Source;
  std::vector<Label> classifications;  // indexed by seed
};

double fraction_desired(const TrialOutcome& outcome, Label desired);

struct MetricValue {
  double mean = 0.0;
  double std_dev = 0.0;  // sample std across seeds; 0 for a single seed
};

struct EvalReport {
  MetricValue efficacy;     // source prompts classified as destination
  MetricValue generality;   // positive prompts classified as destination
  MetricValue specificity;  // negative prompts classified as source
  double harmonic_mean = 0.0;
  std::size_t seed_count = 0;
};

double harmonic_mean(double generality, double specificity);

// Requires at least one outcome of each kind. Means are taken over prompts;
// the dispersion is the sample standard deviation of each metric evaluated
// seed by seed.
EvalReport aggregate(const std::vector<TrialOutcome>& outcomes);

}  // namespace timedit
