#include "timedit/eval.hpp"

#include <cmath>

namespace timedit {

double fraction_desired(const TrialOutcome& outcome, Label desired) {
  if (outcome.classifications.empty())
    fail(ErrorCode::Empty, "outcome '" + outcome.prompt_id + "' has no seeds");
  std::size_t hits = 0;
  for (Label label : outcome.classifications)
    if (label == desired) ++hits;
  return static_cast<double>(hits) / static_cast<double>(outcome.classifications.size());
}

double harmonic_mean(double generality, double specificity) {
  const double sum = generality + specificity;
  if (sum <= 0.0) return 0.0;
  return 2.0 * generality * specificity / sum;
}

namespace {

Label desired_label(PromptKind kind) {
  return kind == PromptKind::Negative ? Label::SourceLabel : Label::DestinationLabel;
}

// Metric value at one seed index: mean over the kind's prompts of the
// desired-label indicator.
double metric_at_seed(const std::vector<TrialOutcome>& outcomes, PromptKind kind,
                      std::size_t seed) {
  double sum = 0.0;
  std::size_t count = 0;
  for (const TrialOutcome& outcome : outcomes) {
    if (outcome.kind != kind) continue;
    sum += outcome.classifications[seed] == desired_label(kind) ? 1.0 : 0.0;
    ++count;
  }
  return sum / static_cast<double>(count);
}

MetricValue metric_over_seeds(const std::vector<TrialOutcome>& outcomes, PromptKind kind,
                              std::size_t seed_count) {
  std::vector<double> per_seed(seed_count);
  double mean = 0.0;
  for (std::size_t s = 0; s < seed_count; ++s) {
    per_seed[s] = metric_at_seed(outcomes, kind, s);
    mean += per_seed[s];
  }
  mean /= static_cast<double>(seed_count);
  double variance = 0.0;
  if (seed_count > 1) {
    for (double v : per_seed) variance += (v - mean) * (v - mean);
    variance /= static_cast<double>(seed_count - 1);
  }
  return {mean, std::sqrt(variance)};
}

}  // namespace

EvalReport aggregate(const std::vector<TrialOutcome>& outcomes) {
  if (outcomes.empty()) fail(ErrorCode::Empty, "no outcomes");
  const std::size_t seed_count = outcomes.front().classifications.size();
  if (seed_count == 0) fail(ErrorCode::Empty, "outcomes carry no seeds");
  for (const TrialOutcome& outcome : outcomes)
    if (outcome.classifications.size() != seed_count)
      fail(ErrorCode::SeedCountMismatch,
           "outcome '" + outcome.prompt_id + "' disagrees on seed count");

  bool has_source = false, has_positive = false, has_negative = false;
  for (const TrialOutcome& outcome : outcomes) {
    has_source |= outcome.kind == PromptKind::Source;
    has_positive |= outcome.kind == PromptKind::Positive;
    has_negative |= outcome.kind == PromptKind::Negative;
  }
  if (!has_source) fail(ErrorCode::MissingKind, "no source outcomes");
  if (!has_positive) fail(ErrorCode::MissingKind, "no positive outcomes");
  if (!has_negative) fail(ErrorCode::MissingKind, "no negative outcomes");

  EvalReport report;
  report.seed_count = seed_count;
  report.efficacy = metric_over_seeds(outcomes, PromptKind::Source, seed_count);
  report.generality = metric_over_seeds(outcomes, PromptKind::Positive, seed_count);
  report.specificity = metric_over_seeds(outcomes, PromptKind::Negative, seed_count);
  report.harmonic_mean = harmonic_mean(report.generality.mean, report.specificity.mean);
  return report;
}

}  // namespace timedit
