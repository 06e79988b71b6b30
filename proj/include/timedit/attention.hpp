#pragma once

#include <cstdint>

#include "timedit/edit.hpp"
#include "timedit/matrix.hpp"

namespace timedit {

struct AttentionConfig {
  std::size_t key_dim = 12;    // m
  std::size_t value_dim = 10;  // d
  std::size_t embed_dim = 16;  // c
  std::size_t query_count = 8; // n
  std::uint64_t seed = 0;      // base seed for callers that loop over seeds
};

// softmax(Q K^T / sqrt(m)), computed with per-row max subtraction. Rows sum
// to 1 and entries stay in [0, 1] for any logit magnitude.
Matrix attention_map(const Matrix& queries, const Matrix& keys);

// O = M V: each output row is a convex combination of value rows.
Matrix attention_output(const Matrix& map, const Matrix& values);

using Feature = Vec;

// Desk-scale stand-in for image generation: a seeded standard-normal query
// block attends to the prompt's keys/values in every layer, and the outputs
// are mean-pooled over layers and query rows. Deterministic in all arguments.
Feature generate_feature(const ModelWeights& model, const EmbeddingSequence& prompt,
                         const AttentionConfig& config, std::uint64_t seed);

enum class Choice { A, B };

// Nearest reference by cosine similarity; exact ties resolve to A.
Choice classify(const Feature& feature, const Feature& reference_a,
                const Feature& reference_b);

double cosine_similarity(const Vec& a, const Vec& b);

}  // namespace timedit
