#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "timedit/attention.hpp"
#include "timedit/debias.hpp"
#include "timedit/edit.hpp"

namespace timedit {

// Profession dataset entry: editing pair, validation prompt for the lambda
// search, and held-out test prompts.
struct ProfessionEntry {
  std::string profession;
  std::string stereotype;  // "male" | "female"
  std::string edit_source;
  std::string edit_destination;
  std::string validation_prompt;
  std::vector<std::string> test_prompts;
};

std::vector<ProfessionEntry> parse_profession_dataset(const nlohmann::json& doc);

// Self-contained world backing the builtin calibration oracle: a seeded
// synthetic model plus token embeddings derived from token strings, with the
// profession words biased toward their stereotypical gender axis and gender
// words pinned to it. Gender of a generated feature is read off by cosine
// proximity to the unedited model's explicitly gendered renderings.
struct SimWorldConfig {
  std::size_t layers = 2;
  std::size_t embed_dim = 32;
  std::size_t key_dim = 16;
  std::size_t value_dim = 16;
  std::size_t query_count = 16;
  std::size_t seeds = 24;
  std::uint64_t world_seed = 2024;
  double stereotype_bias = 1.0;   // lean of profession embeddings
  double context_shift = 5.0;     // contextualization strength in destinations
  double gender_strength = 4.0;   // lean of gender-word embeddings
};

class SimWorld {
 public:
  SimWorld(std::vector<ProfessionEntry> professions, SimWorldConfig config = {});

  const std::vector<ProfessionEntry>& professions() const { return professions_; }
  const ModelWeights& base_model() const { return model_; }
  const SimWorldConfig& config() const { return config_; }

  EditContext edit_context(const ProfessionEntry& entry, double lambda) const;
  ModelWeights edited_model(const ProfessionEntry& entry, double lambda) const;
  ModelWeights multi_edited_model(double lambda) const;

  // Percent of seeds whose feature for the prompt classifies as female.
  double female_fraction(const ModelWeights& model, const std::string& prompt) const;

  // lambda -> percent oracles for the search: per profession on its
  // validation prompt, or the mean over all professions for a shared lambda.
  double validation_fraction(const ProfessionEntry& entry, double lambda) const;
  double nonstereo_fraction(const ProfessionEntry& entry, double lambda) const;
  double mean_nonstereo_fraction(double lambda) const;

  EmbeddingSequence prompt_sequence(const std::string& prompt) const;

  static std::vector<std::string> tokenize(const std::string& prompt);

 private:
  Vec token_embedding(const std::string& token) const;
  EmbeddingSequence contextualized_destination(const EmbeddingSequence& source,
                                               const std::vector<std::string>& dest_tokens) const;
  EmbeddingSequence gendered_variant(const EmbeddingSequence& prompt,
                                     const std::string& gender) const;

  std::vector<ProfessionEntry> professions_;
  SimWorldConfig config_;
  ModelWeights model_;
  Vec female_axis_;
  Vec male_axis_;
};

}  // namespace timedit
