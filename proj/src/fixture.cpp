#include "timedit/fixture.hpp"

#include <set>
#include <sstream>
#include <vector>

#include "timedit/rng.hpp"
#include "timedit/tensor_store.hpp"

namespace timedit {

namespace {

using nlohmann::json;

std::vector<std::string> split(const std::string& text) {
  std::vector<std::string> tokens;
  std::istringstream stream(text);
  std::string token;
  while (stream >> token) tokens.push_back(token);
  return tokens;
}

Vec unit_vec(std::uint64_t seed, std::size_t dim) {
  Rng rng(seed);
  Vec v(dim);
  double norm_sq = 0.0;
  for (double& x : v) {
    x = rng.next_normal();
    norm_sq += x * x;
  }
  const double norm = std::sqrt(norm_sq);
  for (double& x : v) x /= norm;
  return v;
}

struct World {
  const DeskFixtureParams& params;
  std::uint64_t seed;

  Vec base_embedding(const std::string& token) const {
    return unit_vec(Rng::mix(seed ^ fnv1a64(token)), params.embed_dim);
  }

  // Destination prompts shift the subject token toward the inserted
  // attribute word; everything else keeps its base embedding.
  Matrix prompt_matrix(const std::string& prompt, const std::string& subject = {},
                       const std::string& attribute = {}) const {
    const std::vector<std::string> tokens = split(prompt);
    Matrix rows(tokens.size(), params.embed_dim);
    for (std::size_t i = 0; i < tokens.size(); ++i) {
      Vec e = base_embedding(tokens[i]);
      if (!subject.empty() && tokens[i] == subject) {
        const Vec shift = base_embedding(attribute);
        double norm_sq = 0.0;
        for (std::size_t j = 0; j < e.size(); ++j) {
          e[j] += params.context_shift * shift[j];
          norm_sq += e[j] * e[j];
        }
        const double norm = std::sqrt(norm_sq);
        for (double& x : e) x /= norm;
      }
      for (std::size_t j = 0; j < e.size(); ++j) rows(i, j) = e[j];
    }
    return rows;
  }
};

json prompt_json(const std::string& text) {
  return json{{"text", text}, {"tensor", text}};
}

json pair_json(const std::string& source, const std::string& destination) {
  return json{{"source", prompt_json(source)}, {"destination", prompt_json(destination)}};
}

json edit_pair_json(const std::string& source, const std::string& destination) {
  return json{{"source", json{{"tokens", split(source)}, {"tensor", source}}},
              {"destination", json{{"tokens", split(destination)}, {"tensor", destination}}}};
}

}  // namespace

Fixture make_desk_fixture(const DeskFixtureParams& params) {
  Fixture fixture;
  World world{params, Rng::mix(params.seed)};

  // Model: random projections for each cross-attention layer, plus
  // passthrough tensors that no edit may touch.
  Rng rng(Rng::mix(params.seed ^ 0x5eedull));
  for (std::size_t i = 0; i < params.layers; ++i) {
    Matrix w_k(params.key_dim, params.embed_dim);
    Matrix w_v(params.value_dim, params.embed_dim);
    for (double& v : w_k.values()) v = rng.next_normal();
    for (double& v : w_v.values()) v = rng.next_normal();
    const std::string prefix = "layers." + std::to_string(i);
    fixture.checkpoint[prefix + ".attn2.to_k.weight"] = std::move(w_k);
    fixture.checkpoint[prefix + ".attn2.to_v.weight"] = std::move(w_v);

    Matrix ff(8, 8);
    for (double& v : ff.values()) v = rng.next_normal();
    fixture.checkpoint[prefix + ".ff.weight"] = std::move(ff);
  }
  Matrix positional(4, params.embed_dim);
  for (double& v : positional.values()) v = rng.next_normal();
  fixture.checkpoint["embed.positional"] = std::move(positional);

  const std::string subject = "rose";
  const std::string attribute = "blue";

  const std::vector<std::pair<std::string, std::string>> edit_pairs = {
      {"a rose", "a blue rose"},
      {"a photo of a rose", "a photo of a blue rose"},
      {"an image of a rose", "an image of a blue rose"},
      {"a picture of a rose", "a picture of a blue rose"},
  };
  const std::vector<std::pair<std::string, std::string>> positives = {
      {"the rose garden", "the blue rose garden"},
      {"a painting of a rose", "a painting of a blue rose"},
      {"a wild rose", "a wild blue rose"},
      {"rose petals", "blue rose petals"},
      {"a rose at dawn", "a blue rose at dawn"},
  };
  const std::vector<std::pair<std::string, std::string>> negatives = {
      {"a poppy", "a blue poppy"},
      {"a tulip field", "a blue tulip field"},
      {"the sunflower", "the blue sunflower"},
      {"a daisy", "a blue daisy"},
      {"a cactus", "a blue cactus"},
  };

  const auto negative_subject = [](const std::string& prompt) {
    // The flower word of each negative prompt is its second or last token.
    for (const std::string& token : split(prompt))
      if (token != "a" && token != "the") return token;
    return std::string();
  };

  for (const auto& [src, dst] : edit_pairs) {
    fixture.embeddings[src] = world.prompt_matrix(src);
    fixture.embeddings[dst] = world.prompt_matrix(dst, subject, attribute);
  }
  for (const auto& [src, dst] : positives) {
    fixture.embeddings[src] = world.prompt_matrix(src);
    fixture.embeddings[dst] = world.prompt_matrix(dst, subject, attribute);
  }
  for (const auto& [src, dst] : negatives) {
    fixture.embeddings[src] = world.prompt_matrix(src);
    fixture.embeddings[dst] = world.prompt_matrix(dst, negative_subject(src), attribute);
  }

  json pairs = json::array();
  for (const auto& [src, dst] : edit_pairs) pairs.push_back(edit_pair_json(src, dst));
  fixture.edit_request = json{{"lambda", params.lambda},
                              {"edits", json::array({json{{"pairs", pairs}}})}};

  json entry;
  entry["source"] = prompt_json(edit_pairs.front().first);
  entry["destination"] = prompt_json(edit_pairs.front().second);
  entry["positives"] = json::array();
  for (const auto& [src, dst] : positives) entry["positives"].push_back(pair_json(src, dst));
  entry["negatives"] = json::array();
  for (const auto& [src, dst] : negatives) entry["negatives"].push_back(pair_json(src, dst));
  fixture.eval_dataset = json::array({entry});

  fixture.professions = json::array({
      json{{"profession", "ceo"},
           {"stereotype", "male"},
           {"editing", json{{"source", "a ceo"}, {"destination", "a female ceo"}}},
           {"validation_prompt", "a photo of a ceo"},
           {"test_prompts",
            json::array({"a painting of a ceo", "a ceo working", "a ceo laughing",
                         "a ceo in the workplace", "a ceo digital art"})}},
      json{{"profession", "nurse"},
           {"stereotype", "female"},
           {"editing", json{{"source", "a nurse"}, {"destination", "a male nurse"}}},
           {"validation_prompt", "a photo of a nurse"},
           {"test_prompts",
            json::array({"a painting of a nurse", "a nurse working", "a nurse laughing",
                         "a nurse in the workplace", "a nurse digital art"})}},
      json{{"profession", "farmer"},
           {"stereotype", "male"},
           {"editing", json{{"source", "a farmer"}, {"destination", "a female farmer"}}},
           {"validation_prompt", "a photo of a farmer"},
           {"test_prompts",
            json::array({"a painting of a farmer", "a farmer working", "a farmer laughing",
                         "a farmer in the workplace", "a farmer digital art"})}},
      json{{"profession", "librarian"},
           {"stereotype", "female"},
           {"editing", json{{"source", "a librarian"}, {"destination", "a male librarian"}}},
           {"validation_prompt", "a photo of a librarian"},
           {"test_prompts",
            json::array({"a painting of a librarian", "a librarian working",
                         "a librarian laughing", "a librarian in the workplace",
                         "a librarian digital art"})}},
  });

  return fixture;
}

void write_fixture(const Fixture& fixture, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  const std::optional<std::map<std::string, std::string>> metadata{
      std::map<std::string, std::string>{{"format", "pt"}}};
  const auto model_bytes = write_file(fixture.checkpoint, Dtype::F32, metadata);
  write_file_bytes(dir / "model.safetensors", model_bytes);
  const auto embedding_bytes = write_file(fixture.embeddings, Dtype::F32);
  write_file_bytes(dir / "embeddings.safetensors", embedding_bytes);

  const auto dump_json = [&](const json& doc, const std::filesystem::path& path) {
    const std::string text = doc.dump(2) + "\n";
    write_file_bytes(path, std::span<const std::uint8_t>(
                               reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
  };
  dump_json(fixture.edit_request, dir / "edit.json");
  dump_json(fixture.eval_dataset, dir / "eval.json");
  dump_json(fixture.professions, dir / "professions.json");
}

std::map<std::string, Matrix> make_backbone_checkpoint(std::size_t scale_divisor,
                                                       std::uint64_t seed) {
  // Channel widths of the 16 cross-attention layers in the reference
  // backbone, divided down to keep test files small. The blob keeps the
  // edited-parameter share at roughly 2.2%.
  const std::vector<std::size_t> widths = {320, 320, 640, 640, 1280, 1280,  // down
                                           1280,                            // mid
                                           1280, 1280, 1280, 640, 640, 640, 320, 320, 320};  // up
  const std::size_t embed = 768 / scale_divisor;

  std::map<std::string, Matrix> tensors;
  Rng rng(Rng::mix(seed));
  std::uint64_t kv_params = 0;
  for (std::size_t i = 0; i < widths.size(); ++i) {
    const std::size_t dim = widths[i] / scale_divisor;
    Matrix w_k(dim, embed);
    Matrix w_v(dim, embed);
    for (double& v : w_k.values()) v = rng.next_normal();
    for (double& v : w_v.values()) v = rng.next_normal();
    const std::string prefix = "unet.blocks." + std::to_string(i);
    tensors[prefix + ".attn2.to_k.weight"] = std::move(w_k);
    tensors[prefix + ".attn2.to_v.weight"] = std::move(w_v);
    kv_params += 2ull * dim * embed;
  }

  const double target_fraction = 0.022;
  const std::uint64_t total_target =
      static_cast<std::uint64_t>(static_cast<double>(kv_params) / target_fraction);
  const std::uint64_t blob_params = total_target - kv_params;
  const std::size_t blob_cols = 1024;
  const std::size_t blob_rows = static_cast<std::size_t>(blob_params / blob_cols);
  Matrix blob(blob_rows, blob_cols);
  for (double& v : blob.values()) v = rng.next_normal();
  tensors["unet.trunk.weight"] = std::move(blob);
  return tensors;
}

}  // namespace timedit
