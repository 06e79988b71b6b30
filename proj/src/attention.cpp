#include "timedit/attention.hpp"

#include <cmath>
#include <limits>

#include "timedit/rng.hpp"

namespace timedit {

Matrix attention_map(const Matrix& queries, const Matrix& keys) {
  if (queries.cols() != keys.cols())
    fail(ErrorCode::DimensionMismatch, "query dim != key dim");
  if (queries.cols() == 0) fail(ErrorCode::DimensionMismatch, "key dim must be >= 1");
  const double inv_sqrt_m = 1.0 / std::sqrt(static_cast<double>(queries.cols()));

  Matrix map(queries.rows(), keys.rows());
  for (std::size_t i = 0; i < queries.rows(); ++i) {
    double row_max = -std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < keys.rows(); ++j) {
      double logit = 0.0;
      for (std::size_t k = 0; k < queries.cols(); ++k) logit += queries(i, k) * keys(j, k);
      logit *= inv_sqrt_m;
      map(i, j) = logit;
      row_max = std::max(row_max, logit);
    }
    double denom = 0.0;
    for (std::size_t j = 0; j < keys.rows(); ++j) {
      map(i, j) = std::exp(map(i, j) - row_max);
      denom += map(i, j);
    }
    for (std::size_t j = 0; j < keys.rows(); ++j) map(i, j) /= denom;
  }
  return map;
}

Matrix attention_output(const Matrix& map, const Matrix& values) {
  if (map.cols() != values.rows())
    fail(ErrorCode::DimensionMismatch, "map columns != value rows");
  return matmul(map, values);
}

Feature generate_feature(const ModelWeights& model, const EmbeddingSequence& prompt,
                         const AttentionConfig& config, std::uint64_t seed) {
  if (model.layers.empty()) fail(ErrorCode::EmptyModel, "model has no layers");
  if (config.query_count == 0) fail(ErrorCode::DimensionMismatch, "query count must be >= 1");
  prompt.validate();
  const std::size_t l = prompt.length();
  const std::size_t m = model.layers.front().w_k.rows();
  const std::size_t d = model.layers.front().w_v.rows();
  for (const LayerWeights& layer : model.layers) {
    if (layer.w_k.rows() != m || layer.w_v.rows() != d ||
        layer.w_k.cols() != prompt.dim() || layer.w_v.cols() != prompt.dim())
      fail(ErrorCode::DimensionMismatch, "layer dims inconsistent with prompt/model");
  }

  Rng rng(seed);
  Matrix queries(config.query_count, m);
  for (double& q : queries.values()) q = rng.next_normal();

  Feature feature(d, 0.0);
  for (const LayerWeights& layer : model.layers) {
    Matrix keys(l, m);
    Matrix values(l, d);
    for (std::size_t i = 0; i < l; ++i) {
      const Vec k = matvec(layer.w_k, prompt.embeddings[i]);
      const Vec v = matvec(layer.w_v, prompt.embeddings[i]);
      for (std::size_t j = 0; j < m; ++j) keys(i, j) = k[j];
      for (std::size_t j = 0; j < d; ++j) values(i, j) = v[j];
    }
    const Matrix output = attention_output(attention_map(queries, keys), values);
    for (std::size_t r = 0; r < output.rows(); ++r)
      for (std::size_t c = 0; c < d; ++c) feature[c] += output(r, c);
  }
  const double scale = 1.0 / (static_cast<double>(model.layers.size()) *
                              static_cast<double>(config.query_count));
  for (double& f : feature) f *= scale;
  return feature;
}

double cosine_similarity(const Vec& a, const Vec& b) {
  const double na = norm2(a);
  const double nb = norm2(b);
  if (na == 0.0 || nb == 0.0) return 0.0;
  return dot(a, b) / (na * nb);
}

Choice classify(const Feature& feature, const Feature& reference_a,
                const Feature& reference_b) {
  if (norm2(reference_a) == 0.0 || norm2(reference_b) == 0.0)
    fail(ErrorCode::ZeroVector, "classification references must be nonzero");
  const double sim_a = cosine_similarity(feature, reference_a);
  const double sim_b = cosine_similarity(feature, reference_b);
  return sim_b > sim_a ? Choice::B : Choice::A;
}

}  // namespace timedit
