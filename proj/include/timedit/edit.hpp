#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "timedit/linalg.hpp"

namespace timedit {

// Ordered token embeddings for one prompt. Token strings drive alignment;
// the engine never tokenizes text itself.
struct EmbeddingSequence {
  std::vector<std::string> tokens;
  std::vector<Vec> embeddings;

  std::size_t length() const { return tokens.size(); }
  std::size_t dim() const { return embeddings.empty() ? 0 : embeddings.front().size(); }
  void validate() const;
};

// Matched (source index, destination index) pairs. Source indices are
// exhaustive and increasing; destination indices strictly increase, and
// destination tokens skipped between matches are discarded.
struct Alignment {
  std::vector<std::pair<std::size_t, std::size_t>> pairs;
};

// Greedy in-order matching: each source token takes the first unconsumed
// destination token with the same string; with no string match it falls back
// to the first unconsumed position.
Alignment align_tokens(const EmbeddingSequence& source, const EmbeddingSequence& destination);

// Aligned (c_i, c*_i) vector pairs pooled over one or more prompt pairs
// (typically the original pair plus its augmented variants), plus the
// regularization strength.
struct EditContext {
  std::vector<Vec> source_vectors;
  std::vector<Vec> destination_vectors;
  double lambda = 0.0;

  std::size_t size() const { return source_vectors.size(); }
  std::size_t dim() const { return source_vectors.empty() ? 0 : source_vectors.front().size(); }
  void validate() const;
};

struct PromptPair {
  EmbeddingSequence source;
  EmbeddingSequence destination;
};

EditContext build_context(const std::vector<PromptPair>& pairs, double lambda);

// Key/value projections of one cross-attention layer, in out x c orientation.
struct LayerWeights {
  std::string layer_name;
  Matrix w_k;  // m x c
  Matrix w_v;  // d x c
};

struct ModelWeights {
  std::vector<LayerWeights> layers;
};

// Targets are built from the ORIGINAL layer matrices (k* = W_K c*, v* = W_V c*),
// then each projection is replaced by its closed-form minimizer.
LayerWeights edit_layer(const LayerWeights& layer, const EditContext& context);

// Applies the edit to every layer independently. With key_and_value false only
// W_V is replaced and W_K is carried through bit-identical.
ModelWeights edit_model(const ModelWeights& model, const EditContext& context,
                        bool key_and_value = true);

// Several edits in one pass: gram and cross sums pool over all contexts, then
// one solve per matrix. All contexts must carry the same lambda.
ModelWeights multi_edit(const ModelWeights& model, const std::vector<EditContext>& contexts,
                        bool key_and_value = true);

}  // namespace timedit
