#include <doctest.h>

#include "helpers.hpp"
#include "timedit/edit.hpp"

using namespace timedit;

namespace {

EmbeddingSequence sequence(const std::vector<std::string>& tokens, std::size_t dim = 4,
                           std::uint64_t seed = 1) {
  EmbeddingSequence seq;
  seq.tokens = tokens;
  for (const std::string& token : tokens) {
    Rng rng(Rng::mix(seed ^ fnv1a64(token)));
    Vec e(dim);
    for (double& x : e) x = rng.next_normal();
    seq.embeddings.push_back(std::move(e));
  }
  return seq;
}

EditContext simple_context(double lambda) {
  EditContext context;
  context.source_vectors = {{1.0, 0.0}};
  context.destination_vectors = {{0.0, 1.0}};
  context.lambda = lambda;
  return context;
}

ModelWeights random_model(std::size_t layers, std::size_t m, std::size_t d, std::size_t c,
                          std::uint64_t seed) {
  Rng rng(seed);
  ModelWeights model;
  for (std::size_t i = 0; i < layers; ++i) {
    LayerWeights layer;
    layer.layer_name = "layer." + std::to_string(i);
    layer.w_k = testutil::random_matrix(rng, m, c);
    layer.w_v = testutil::random_matrix(rng, d, c);
    model.layers.push_back(std::move(layer));
  }
  return model;
}

EditContext identity_context(const ModelWeights& model, std::size_t pairs, double lambda,
                             std::uint64_t seed) {
  Rng rng(seed);
  EditContext context;
  context.lambda = lambda;
  const std::size_t c = model.layers.front().w_k.cols();
  for (std::size_t i = 0; i < pairs; ++i) {
    const Vec v = testutil::random_vec(rng, c);
    context.source_vectors.push_back(v);
    context.destination_vectors.push_back(v);
  }
  return context;
}

}  // namespace

TEST_CASE("align_tokens: inserted destination tokens are discarded") {
  const auto alignment = align_tokens(sequence({"a", "pack", "of", "roses"}),
                                      sequence({"a", "pack", "of", "blue", "roses"}));
  const std::vector<std::pair<std::size_t, std::size_t>> expected = {
      {0, 0}, {1, 1}, {2, 2}, {3, 4}};
  CHECK(alignment.pairs == expected);
}

TEST_CASE("align_tokens: identical sequences align positionally") {
  const auto alignment =
      align_tokens(sequence({"x", "y", "z"}), sequence({"x", "y", "z"}));
  const std::vector<std::pair<std::size_t, std::size_t>> expected = {{0, 0}, {1, 1}, {2, 2}};
  CHECK(alignment.pairs == expected);
}

TEST_CASE("align_tokens: leading insertion shifts the match") {
  const auto alignment = align_tokens(sequence({"dog"}), sequence({"green", "dog"}));
  const std::vector<std::pair<std::size_t, std::size_t>> expected = {{0, 1}};
  CHECK(alignment.pairs == expected);
}

TEST_CASE("align_tokens: positional fallback for unmatched tokens") {
  const auto alignment = align_tokens(sequence({"x", "y"}), sequence({"p", "q"}));
  const std::vector<std::pair<std::size_t, std::size_t>> expected = {{0, 0}, {1, 1}};
  CHECK(alignment.pairs == expected);
}

TEST_CASE("align_tokens: exhausted destination is an error") {
  CHECK_FAILS_WITH(align_tokens(sequence({"y", "x"}), sequence({"a", "y"})),
                   ErrorCode::DestinationTooShort);
}

TEST_CASE("align_tokens: destination indices strictly increase on random inputs") {
  Rng rng(41);
  const std::vector<std::string> vocab = {"a", "b", "c", "d"};
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<std::string> src, dst;
    const std::size_t n = 1 + rng.next_u64() % 5;
    for (std::size_t i = 0; i < n; ++i) src.push_back(vocab[rng.next_u64() % vocab.size()]);
    for (std::size_t i = 0; i < n + 3; ++i) dst.push_back(vocab[rng.next_u64() % vocab.size()]);
    try {
      const auto alignment = align_tokens(sequence(src), sequence(dst));
      REQUIRE(alignment.pairs.size() == src.size());
      for (std::size_t i = 1; i < alignment.pairs.size(); ++i) {
        CHECK(alignment.pairs[i].first == i);
        CHECK(alignment.pairs[i].second > alignment.pairs[i - 1].second);
      }
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::DestinationTooShort);
    }
  }
}

TEST_CASE("build_context: single pair keeps the aligned length") {
  const PromptPair pair{sequence({"a", "b", "c", "d"}), sequence({"a", "b", "c", "d"})};
  const EditContext context = build_context({pair}, 0.1);
  CHECK(context.size() == 4);
}

TEST_CASE("build_context: four pairs concatenate") {
  std::vector<PromptPair> pairs;
  pairs.push_back({sequence({"a", "b", "c", "d"}), sequence({"a", "b", "c", "d"})});
  for (int i = 0; i < 3; ++i) {
    const std::string tag = std::to_string(i);
    pairs.push_back({sequence({"p" + tag, "q" + tag, "a", "b", "c", "d"}),
                     sequence({"p" + tag, "q" + tag, "a", "x", "b", "c", "d"})});
  }
  const EditContext context = build_context(pairs, 0.1);
  CHECK(context.size() == 4 + 6 + 6 + 6);
}

TEST_CASE("build_context: mixed embedding dims are rejected") {
  const PromptPair ok{sequence({"a"}, 8), sequence({"a"}, 8)};
  const PromptPair bad{sequence({"b"}, 16), sequence({"b"}, 16)};
  CHECK_FAILS_WITH(build_context({ok, bad}, 0.1), ErrorCode::MixedDimensions);
  const PromptPair uneven{sequence({"a"}, 8), sequence({"a"}, 16)};
  CHECK_FAILS_WITH(build_context({uneven}, 0.1), ErrorCode::MixedDimensions);
}

TEST_CASE("edit_layer: identity context is a fixed point") {
  const ModelWeights model = random_model(1, 5, 6, 4, 51);
  const EditContext context = identity_context(model, 3, 0.1, 52);
  const LayerWeights edited = edit_layer(model.layers[0], context);
  CHECK(max_abs_diff(edited.w_k, model.layers[0].w_k) <= 1e-10);
  CHECK(max_abs_diff(edited.w_v, model.layers[0].w_v) <= 1e-10);
}

TEST_CASE("edit_layer: two-by-two instance matches the ridge oracle value") {
  LayerWeights layer;
  layer.layer_name = "only";
  layer.w_k = Matrix::identity(2);
  layer.w_v = Matrix::identity(2);
  const LayerWeights edited = edit_layer(layer, simple_context(1.0));
  const Matrix expected = Matrix::from_rows({{0.5, 0.0}, {0.5, 1.0}});
  CHECK(max_abs_diff(edited.w_k, expected) <= 1e-12);
  CHECK(max_abs_diff(edited.w_v, expected) <= 1e-12);
}

TEST_CASE("edit_layer: huge lambda leaves the layer in place") {
  const ModelWeights model = random_model(1, 4, 4, 4, 53);
  Rng rng(54);
  EditContext context;
  context.lambda = 1e12;
  context.source_vectors = {testutil::random_vec(rng, 4)};
  context.destination_vectors = {testutil::random_vec(rng, 4)};
  const LayerWeights edited = edit_layer(model.layers[0], context);
  CHECK(frobenius_norm(sub(edited.w_k, model.layers[0].w_k)) <=
        1e-9 * frobenius_norm(model.layers[0].w_k));
}

TEST_CASE("edit_model: identity context over sixteen layers") {
  const ModelWeights model = random_model(16, 6, 5, 8, 55);
  const EditContext context = identity_context(model, 4, 0.1, 56);
  const ModelWeights edited = edit_model(model, context);
  REQUIRE(edited.layers.size() == 16);
  for (std::size_t i = 0; i < 16; ++i) {
    CHECK(max_abs_diff(edited.layers[i].w_k, model.layers[i].w_k) <= 1e-10);
    CHECK(max_abs_diff(edited.layers[i].w_v, model.layers[i].w_v) <= 1e-10);
  }
}

TEST_CASE("edit_model: value-only keeps keys bit-identical") {
  const ModelWeights model = random_model(3, 5, 5, 6, 57);
  Rng rng(58);
  EditContext context;
  context.lambda = 0.1;
  context.source_vectors = {testutil::random_vec(rng, 6)};
  context.destination_vectors = {testutil::random_vec(rng, 6)};
  const ModelWeights edited = edit_model(model, context, /*key_and_value=*/false);
  for (std::size_t i = 0; i < model.layers.size(); ++i) {
    CHECK(edited.layers[i].w_k == model.layers[i].w_k);
    CHECK(max_abs_diff(edited.layers[i].w_v, model.layers[i].w_v) > 0.0);
  }
}

TEST_CASE("edit_model: empty model is rejected") {
  CHECK_FAILS_WITH(edit_model(ModelWeights{}, simple_context(0.1)), ErrorCode::EmptyModel);
}

TEST_CASE("edit_model: inputs are not mutated") {
  const ModelWeights model = random_model(2, 4, 4, 4, 59);
  const ModelWeights snapshot = model;
  Rng rng(60);
  EditContext context;
  context.lambda = 0.1;
  context.source_vectors = {testutil::random_vec(rng, 4)};
  context.destination_vectors = {testutil::random_vec(rng, 4)};
  const EditContext context_snapshot = context;
  (void)edit_model(model, context);
  for (std::size_t i = 0; i < model.layers.size(); ++i) {
    CHECK(model.layers[i].w_k == snapshot.layers[i].w_k);
    CHECK(model.layers[i].w_v == snapshot.layers[i].w_v);
  }
  CHECK(context.source_vectors == context_snapshot.source_vectors);
}

TEST_CASE("multi_edit: single context equals edit_model bitwise") {
  const ModelWeights model = random_model(3, 6, 5, 7, 61);
  Rng rng(62);
  EditContext context;
  context.lambda = 0.25;
  for (int i = 0; i < 4; ++i) {
    context.source_vectors.push_back(testutil::random_vec(rng, 7));
    context.destination_vectors.push_back(testutil::random_vec(rng, 7));
  }
  const ModelWeights a = edit_model(model, context);
  const ModelWeights b = multi_edit(model, {context});
  REQUIRE(a.layers.size() == b.layers.size());
  for (std::size_t i = 0; i < a.layers.size(); ++i) {
    CHECK(a.layers[i].w_k == b.layers[i].w_k);
    CHECK(a.layers[i].w_v == b.layers[i].w_v);
  }
}

TEST_CASE("multi_edit: duplicated context equals a single edit at half lambda") {
  const ModelWeights model = random_model(2, 5, 4, 6, 63);
  Rng rng(64);
  EditContext context;
  context.lambda = 0.8;
  for (int i = 0; i < 3; ++i) {
    context.source_vectors.push_back(testutil::random_vec(rng, 6));
    context.destination_vectors.push_back(testutil::random_vec(rng, 6));
  }
  const ModelWeights doubled = multi_edit(model, {context, context});
  EditContext halved = context;
  halved.lambda = context.lambda / 2.0;
  const ModelWeights single = edit_model(model, halved);
  for (std::size_t i = 0; i < model.layers.size(); ++i) {
    CHECK(max_abs_diff(doubled.layers[i].w_k, single.layers[i].w_k) <= 1e-10);
    CHECK(max_abs_diff(doubled.layers[i].w_v, single.layers[i].w_v) <= 1e-10);
  }
}

TEST_CASE("multi_edit: mismatched lambdas are rejected") {
  const ModelWeights model = random_model(1, 4, 4, 2, 65);
  EditContext a = simple_context(0.1);
  EditContext b = simple_context(0.2);
  CHECK_FAILS_WITH(multi_edit(model, {a, b}), ErrorCode::LambdaMismatch);
}

TEST_CASE("multi_edit: disjoint edits keep their per-edit residuals") {
  // Two edits on orthogonal input directions; pooling them must not degrade
  // either edit much beyond its single-edit residual.
  const std::size_t c = 16, out = 32;
  ModelWeights model = random_model(1, out, out, c, 66);
  Rng rng(67);

  EditContext first, second;
  first.lambda = second.lambda = 0.1;
  Vec e1(c, 0.0), e2(c, 0.0);
  e1[0] = 1.0;
  e2[1] = 1.0;
  first.source_vectors = {e1};
  first.destination_vectors = {testutil::random_vec(rng, c)};
  second.source_vectors = {e2};
  second.destination_vectors = {testutil::random_vec(rng, c)};

  const ModelWeights joint = multi_edit(model, {first, second});
  const auto residual = [&](const Matrix& w, const Matrix& w0, const EditContext& ctx) {
    const Vec target = matvec(w0, ctx.destination_vectors[0]);
    const Vec mapped = matvec(w, ctx.source_vectors[0]);
    double acc = 0.0;
    for (std::size_t i = 0; i < mapped.size(); ++i) {
      const double d = mapped[i] - target[i];
      acc += d * d;
    }
    return std::sqrt(acc);
  };

  for (const EditContext& ctx : {first, second}) {
    const ModelWeights solo = edit_model(model, ctx);
    const double solo_residual = residual(solo.layers[0].w_k, model.layers[0].w_k, ctx);
    const double joint_residual = residual(joint.layers[0].w_k, model.layers[0].w_k, ctx);
    CHECK(joint_residual <= solo_residual * 1.10 + 1e-9);
  }
}

TEST_CASE("layer independence: one-at-a-time equals all-at-once bitwise") {
  const ModelWeights model = random_model(4, 5, 6, 7, 68);
  Rng rng(69);
  EditContext context;
  context.lambda = 0.3;
  for (int i = 0; i < 3; ++i) {
    context.source_vectors.push_back(testutil::random_vec(rng, 7));
    context.destination_vectors.push_back(testutil::random_vec(rng, 7));
  }
  const ModelWeights whole = edit_model(model, context);
  for (std::size_t i = 0; i < model.layers.size(); ++i) {
    const LayerWeights solo = edit_layer(model.layers[i], context);
    CHECK(solo.w_k == whole.layers[i].w_k);
    CHECK(solo.w_v == whole.layers[i].w_v);
  }
}
