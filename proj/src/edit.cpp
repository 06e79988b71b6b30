#include "timedit/edit.hpp"

#include <string>

namespace timedit {

void EmbeddingSequence::validate() const {
  if (tokens.empty()) fail(ErrorCode::BadRequest, "embedding sequence is empty");
  if (tokens.size() != embeddings.size())
    fail(ErrorCode::BadRequest, "token/embedding count mismatch");
  const std::size_t d = embeddings.front().size();
  for (const Vec& e : embeddings)
    if (e.size() != d) fail(ErrorCode::MixedDimensions, "embedding dims differ within a prompt");
}

Alignment align_tokens(const EmbeddingSequence& source, const EmbeddingSequence& destination) {
  source.validate();
  destination.validate();

  Alignment alignment;
  alignment.pairs.reserve(source.length());
  std::size_t next = 0;  // first unconsumed destination index
  for (std::size_t i = 0; i < source.length(); ++i) {
    if (next >= destination.length())
      fail(ErrorCode::DestinationTooShort,
           "destination exhausted at source token " + std::to_string(i) + " ('" +
               source.tokens[i] + "')");
    std::size_t match = next;
    bool found = false;
    for (std::size_t j = next; j < destination.length(); ++j) {
      if (destination.tokens[j] == source.tokens[i]) {
        match = j;
        found = true;
        break;
      }
    }
    if (!found) match = next;  // positional fallback
    alignment.pairs.emplace_back(i, match);
    next = match + 1;
  }
  return alignment;
}

void EditContext::validate() const {
  if (source_vectors.empty()) fail(ErrorCode::BadRequest, "edit context is empty");
  if (source_vectors.size() != destination_vectors.size())
    fail(ErrorCode::BadRequest, "context pair count mismatch");
  if (!(lambda >= kMinLambda))
    fail(ErrorCode::InvalidLambda, "context lambda below minimum");
  const std::size_t d = source_vectors.front().size();
  for (const Vec& v : source_vectors)
    if (v.size() != d) fail(ErrorCode::MixedDimensions, "context source dims differ");
  for (const Vec& v : destination_vectors)
    if (v.size() != d) fail(ErrorCode::MixedDimensions, "context destination dims differ");
}

EditContext build_context(const std::vector<PromptPair>& pairs, double lambda) {
  if (pairs.empty()) fail(ErrorCode::BadRequest, "no prompt pairs supplied");
  EditContext context;
  context.lambda = lambda;
  for (const PromptPair& pair : pairs) {
    const Alignment alignment = align_tokens(pair.source, pair.destination);
    if (pair.source.dim() != pair.destination.dim())
      fail(ErrorCode::MixedDimensions, "source and destination embedding dims differ");
    if (!context.source_vectors.empty() && pair.source.dim() != context.dim())
      fail(ErrorCode::MixedDimensions, "prompt pairs carry different embedding dims");
    for (const auto& [si, di] : alignment.pairs) {
      context.source_vectors.push_back(pair.source.embeddings[si]);
      context.destination_vectors.push_back(pair.destination.embeddings[di]);
    }
  }
  context.validate();
  return context;
}

LayerWeights edit_layer(const LayerWeights& layer, const EditContext& context) {
  context.validate();
  if (layer.w_k.cols() != context.dim() || layer.w_v.cols() != context.dim())
    fail(ErrorCode::DimensionMismatch, "context dim != layer column count");

  GramAccumulator gram(0, context.dim());
  for (const Vec& c : context.source_vectors) gram.add(c, Vec{});
  const CholeskyFactor factor(regularized_gram(gram.gram(), context.lambda));

  GramAccumulator key_cross(layer.w_k.rows(), context.dim());
  GramAccumulator value_cross(layer.w_v.rows(), context.dim());
  for (std::size_t i = 0; i < context.size(); ++i) {
    const Vec& c = context.source_vectors[i];
    const Vec& c_star = context.destination_vectors[i];
    key_cross.add(c, matvec(layer.w_k, c_star));
    value_cross.add(c, matvec(layer.w_v, c_star));
  }

  LayerWeights edited;
  edited.layer_name = layer.layer_name;
  edited.w_k = ridge_solve(layer.w_k, key_cross.cross(), factor, context.lambda);
  edited.w_v = ridge_solve(layer.w_v, value_cross.cross(), factor, context.lambda);
  return edited;
}

ModelWeights edit_model(const ModelWeights& model, const EditContext& context,
                        bool key_and_value) {
  return multi_edit(model, {context}, key_and_value);
}

ModelWeights multi_edit(const ModelWeights& model, const std::vector<EditContext>& contexts,
                        bool key_and_value) {
  if (model.layers.empty()) fail(ErrorCode::EmptyModel, "model has no cross-attention layers");
  if (contexts.empty()) fail(ErrorCode::BadRequest, "no edit contexts supplied");
  for (const EditContext& context : contexts) context.validate();
  const double lambda = contexts.front().lambda;
  for (const EditContext& context : contexts)
    if (context.lambda != lambda)
      fail(ErrorCode::LambdaMismatch, "all contexts must share one lambda");
  const std::size_t dim = contexts.front().dim();
  for (const EditContext& context : contexts)
    if (context.dim() != dim) fail(ErrorCode::MixedDimensions, "contexts carry different dims");
  for (const LayerWeights& layer : model.layers)
    if (layer.w_k.cols() != dim || layer.w_v.cols() != dim)
      fail(ErrorCode::DimensionMismatch,
           "layer '" + layer.layer_name + "' column count != context dim");

  // The gram factor depends only on the contexts, not the layer.
  GramAccumulator gram(0, dim);
  for (const EditContext& context : contexts)
    for (const Vec& c : context.source_vectors) gram.add(c, Vec{});
  const CholeskyFactor factor(regularized_gram(gram.gram(), lambda));

  ModelWeights edited;
  edited.layers.reserve(model.layers.size());
  for (const LayerWeights& layer : model.layers) {
    GramAccumulator key_cross(layer.w_k.rows(), dim);
    GramAccumulator value_cross(layer.w_v.rows(), dim);
    for (const EditContext& context : contexts) {
      for (std::size_t i = 0; i < context.size(); ++i) {
        const Vec& c = context.source_vectors[i];
        const Vec& c_star = context.destination_vectors[i];
        key_cross.add(c, matvec(layer.w_k, c_star));
        value_cross.add(c, matvec(layer.w_v, c_star));
      }
    }
    LayerWeights out;
    out.layer_name = layer.layer_name;
    out.w_k = key_and_value ? ridge_solve(layer.w_k, key_cross.cross(), factor, lambda)
                            : layer.w_k;
    out.w_v = ridge_solve(layer.w_v, value_cross.cross(), factor, lambda);
    edited.layers.push_back(std::move(out));
  }
  return edited;
}

}  // namespace timedit
