#include "timedit/debias_sim.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <set>

#include "timedit/rng.hpp"

namespace timedit {

namespace {

using nlohmann::json;

const std::set<std::string>& stopwords() {
  static const std::set<std::string> words = {"a", "an", "the", "of"};
  return words;
}

Vec normalized(Vec v) {
  const double n = norm2(v);
  if (n == 0.0) fail(ErrorCode::ZeroVector, "cannot normalize a zero vector");
  for (double& x : v) x /= n;
  return v;
}

Vec random_unit(std::uint64_t seed, std::size_t dim) {
  Rng rng(seed);
  Vec v(dim);
  for (double& x : v) x = rng.next_normal();
  return normalized(std::move(v));
}

}  // namespace

std::vector<ProfessionEntry> parse_profession_dataset(const json& doc) {
  const json* list = &doc;
  if (doc.is_object() && doc.contains("entries")) list = &doc["entries"];
  if (!list->is_array()) fail(ErrorCode::BadRequest, "profession dataset must be a list");
  std::vector<ProfessionEntry> entries;
  for (const json& node : *list) {
    ProfessionEntry entry;
    if (!node.is_object() || !node.contains("profession") || !node.contains("stereotype") ||
        !node.contains("editing") || !node.contains("validation_prompt"))
      fail(ErrorCode::BadRequest, "profession entry misses a required field");
    entry.profession = node["profession"].get<std::string>();
    entry.stereotype = node["stereotype"].get<std::string>();
    if (entry.stereotype != "male" && entry.stereotype != "female")
      fail(ErrorCode::BadRequest, "stereotype must be 'male' or 'female'");
    const json& editing = node["editing"];
    if (!editing.is_object() || !editing.contains("source") || !editing.contains("destination"))
      fail(ErrorCode::BadRequest, "editing needs source and destination prompts");
    entry.edit_source = editing["source"].get<std::string>();
    entry.edit_destination = editing["destination"].get<std::string>();
    entry.validation_prompt = node["validation_prompt"].get<std::string>();
    if (node.contains("test_prompts"))
      for (const json& p : node["test_prompts"]) entry.test_prompts.push_back(p.get<std::string>());
    entries.push_back(std::move(entry));
  }
  if (entries.empty()) fail(ErrorCode::BadRequest, "profession dataset has no entries");
  return entries;
}

std::vector<std::string> SimWorld::tokenize(const std::string& prompt) {
  std::vector<std::string> tokens;
  std::string current;
  for (char raw : prompt) {
    const char c = static_cast<char>(std::tolower(static_cast<unsigned char>(raw)));
    if (std::isspace(static_cast<unsigned char>(c))) {
      if (!current.empty()) tokens.push_back(std::move(current));
      current.clear();
    } else {
      current.push_back(c);
    }
  }
  if (!current.empty()) tokens.push_back(std::move(current));
  if (tokens.empty()) fail(ErrorCode::BadRequest, "prompt has no tokens: '" + prompt + "'");
  return tokens;
}

SimWorld::SimWorld(std::vector<ProfessionEntry> professions, SimWorldConfig config)
    : professions_(std::move(professions)), config_(config) {
  female_axis_ = random_unit(Rng::mix(config_.world_seed ^ fnv1a64("female-axis")),
                             config_.embed_dim);
  male_axis_ = random_unit(Rng::mix(config_.world_seed ^ fnv1a64("male-axis")),
                           config_.embed_dim);
  // Orthogonalize the axes so the two gender directions cannot alias.
  const double overlap = dot(male_axis_, female_axis_);
  for (std::size_t i = 0; i < male_axis_.size(); ++i)
    male_axis_[i] -= overlap * female_axis_[i];
  male_axis_ = normalized(std::move(male_axis_));

  Rng rng(config_.world_seed ^ fnv1a64("model-weights"));
  for (std::size_t i = 0; i < config_.layers; ++i) {
    LayerWeights layer;
    layer.layer_name = "sim." + std::to_string(i);
    layer.w_k = Matrix(config_.key_dim, config_.embed_dim);
    layer.w_v = Matrix(config_.value_dim, config_.embed_dim);
    for (double& v : layer.w_k.values()) v = rng.next_normal();
    for (double& v : layer.w_v.values()) v = rng.next_normal();
    model_.layers.push_back(std::move(layer));
  }
}

Vec SimWorld::token_embedding(const std::string& token) const {
  Vec base = random_unit(Rng::mix(config_.world_seed ^ fnv1a64(token)), config_.embed_dim);

  const Vec* axis = nullptr;
  double lean = 0.0;
  if (token == "female" || token == "woman") {
    axis = &female_axis_;
    lean = config_.gender_strength;
  } else if (token == "male" || token == "man") {
    axis = &male_axis_;
    lean = config_.gender_strength;
  } else {
    for (const ProfessionEntry& entry : professions_) {
      if (token == entry.profession) {
        axis = entry.stereotype == "female" ? &female_axis_ : &male_axis_;
        lean = config_.stereotype_bias;
        break;
      }
    }
  }
  if (axis) {
    for (std::size_t i = 0; i < base.size(); ++i) base[i] += lean * (*axis)[i];
    base = normalized(std::move(base));
  }
  return base;
}

EmbeddingSequence SimWorld::prompt_sequence(const std::string& prompt) const {
  EmbeddingSequence seq;
  seq.tokens = tokenize(prompt);
  for (const std::string& token : seq.tokens) seq.embeddings.push_back(token_embedding(token));
  return seq;
}

EmbeddingSequence SimWorld::contextualized_destination(
    const EmbeddingSequence& source, const std::vector<std::string>& dest_tokens) const {
  // Tokens new to the destination keep their own embedding; tokens shared
  // with the source drift toward the mean of the new tokens, mimicking how a
  // text encoder propagates an inserted attribute.
  std::set<std::string> source_tokens(source.tokens.begin(), source.tokens.end());
  Vec shift(config_.embed_dim, 0.0);
  std::size_t new_count = 0;
  for (const std::string& token : dest_tokens) {
    if (source_tokens.count(token)) continue;
    const Vec e = token_embedding(token);
    for (std::size_t i = 0; i < shift.size(); ++i) shift[i] += e[i];
    ++new_count;
  }
  if (new_count > 0) {
    for (double& s : shift) s /= static_cast<double>(new_count);
  }

  EmbeddingSequence seq;
  seq.tokens = dest_tokens;
  for (const std::string& token : dest_tokens) {
    Vec e = token_embedding(token);
    if (new_count > 0 && source_tokens.count(token) && !stopwords().count(token)) {
      for (std::size_t i = 0; i < e.size(); ++i) e[i] += config_.context_shift * shift[i];
      e = normalized(std::move(e));
    }
    seq.embeddings.push_back(std::move(e));
  }
  return seq;
}

EmbeddingSequence SimWorld::gendered_variant(const EmbeddingSequence& prompt,
                                             const std::string& gender) const {
  // Same token rows as the prompt, with the profession word pushed along the
  // requested gender axis. Keeping the row count equal makes the cosine
  // comparison sensitive to direction only, not to extra reference rows.
  const Vec& axis = gender == "female" ? female_axis_ : male_axis_;
  EmbeddingSequence seq;
  seq.tokens = prompt.tokens;
  for (std::size_t i = 0; i < prompt.tokens.size(); ++i) {
    Vec e = prompt.embeddings[i];
    bool is_profession = false;
    for (const ProfessionEntry& entry : professions_)
      if (prompt.tokens[i] == entry.profession) is_profession = true;
    if (is_profession) {
      for (std::size_t j = 0; j < e.size(); ++j) e[j] += config_.context_shift * axis[j];
      e = normalized(std::move(e));
    }
    seq.embeddings.push_back(std::move(e));
  }
  return seq;
}

EditContext SimWorld::edit_context(const ProfessionEntry& entry, double lambda) const {
  PromptPair pair;
  pair.source = prompt_sequence(entry.edit_source);
  pair.destination =
      contextualized_destination(pair.source, tokenize(entry.edit_destination));
  return build_context({pair}, lambda);
}

ModelWeights SimWorld::edited_model(const ProfessionEntry& entry, double lambda) const {
  return edit_model(model_, edit_context(entry, lambda));
}

ModelWeights SimWorld::multi_edited_model(double lambda) const {
  std::vector<EditContext> contexts;
  contexts.reserve(professions_.size());
  for (const ProfessionEntry& entry : professions_)
    contexts.push_back(edit_context(entry, lambda));
  return multi_edit(model_, contexts);
}

double SimWorld::female_fraction(const ModelWeights& model, const std::string& prompt) const {
  const EmbeddingSequence seq = prompt_sequence(prompt);
  AttentionConfig attn;
  attn.key_dim = config_.key_dim;
  attn.value_dim = config_.value_dim;
  attn.embed_dim = config_.embed_dim;
  attn.query_count = config_.query_count;

  const std::uint64_t base_seed = config_.world_seed + 1;
  Feature female_ref(config_.value_dim, 0.0);
  Feature male_ref(config_.value_dim, 0.0);
  const EmbeddingSequence female_seq = gendered_variant(seq, "female");
  const EmbeddingSequence male_seq = gendered_variant(seq, "male");
  for (std::size_t s = 0; s < config_.seeds; ++s) {
    const Feature f = generate_feature(model_, female_seq, attn, base_seed + s);
    const Feature m = generate_feature(model_, male_seq, attn, base_seed + s);
    for (std::size_t i = 0; i < config_.value_dim; ++i) {
      female_ref[i] += f[i];
      male_ref[i] += m[i];
    }
  }
  for (double& v : female_ref) v /= static_cast<double>(config_.seeds);
  for (double& v : male_ref) v /= static_cast<double>(config_.seeds);

  std::size_t female_count = 0;
  for (std::size_t s = 0; s < config_.seeds; ++s) {
    const Feature f = generate_feature(model, seq, attn, base_seed + s);
    if (classify(f, female_ref, male_ref) == Choice::A) ++female_count;
  }
  return 100.0 * static_cast<double>(female_count) / static_cast<double>(config_.seeds);
}

double SimWorld::validation_fraction(const ProfessionEntry& entry, double lambda) const {
  return female_fraction(edited_model(entry, lambda), entry.validation_prompt);
}

double SimWorld::nonstereo_fraction(const ProfessionEntry& entry, double lambda) const {
  const double f = validation_fraction(entry, lambda);
  return entry.stereotype == "male" ? f : 100.0 - f;
}

double SimWorld::mean_nonstereo_fraction(double lambda) const {
  const ModelWeights edited = multi_edited_model(lambda);
  double sum = 0.0;
  for (const ProfessionEntry& entry : professions_) {
    const double f = female_fraction(edited, entry.validation_prompt);
    sum += entry.stereotype == "male" ? f : 100.0 - f;
  }
  return sum / static_cast<double>(professions_.size());
}

}  // namespace timedit
