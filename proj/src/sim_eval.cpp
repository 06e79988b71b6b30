#include "timedit/sim_eval.hpp"

#include <string>

namespace timedit {

namespace {

using nlohmann::json;

PromptRef parse_prompt_ref(const json& node, const char* where) {
  PromptRef ref;
  if (node.is_string()) {
    ref.text = node.get<std::string>();
    ref.tensor = ref.text;
    return ref;
  }
  if (!node.is_object() || !node.contains("text"))
    fail(ErrorCode::BadRequest, std::string(where) + ": prompt must be a string or {text, tensor}");
  ref.text = node["text"].get<std::string>();
  ref.tensor = node.value("tensor", ref.text);
  return ref;
}

TestPair parse_test_pair(const json& node, const char* where) {
  if (!node.is_object() || !node.contains("source") || !node.contains("destination"))
    fail(ErrorCode::BadRequest, std::string(where) + ": pair needs source and destination");
  return {parse_prompt_ref(node["source"], where), parse_prompt_ref(node["destination"], where)};
}

}  // namespace

std::vector<EvalEntry> parse_eval_dataset(const json& doc) {
  const json* list = &doc;
  if (doc.is_object() && doc.contains("entries")) list = &doc["entries"];
  if (!list->is_array()) fail(ErrorCode::BadRequest, "dataset must be a list of entries");
  std::vector<EvalEntry> entries;
  for (const json& node : *list) {
    EvalEntry entry;
    entry.edit = parse_test_pair(node, "entry");
    if (node.contains("positives"))
      for (const json& p : node["positives"]) entry.positives.push_back(parse_test_pair(p, "positive"));
    if (node.contains("negatives"))
      for (const json& n : node["negatives"]) entry.negatives.push_back(parse_test_pair(n, "negative"));
    entries.push_back(std::move(entry));
  }
  if (entries.empty()) fail(ErrorCode::BadRequest, "dataset has no entries");
  return entries;
}

EditRequest parse_edit_request(const json& doc) {
  if (!doc.is_object() || !doc.contains("edits") || !doc["edits"].is_array())
    fail(ErrorCode::BadRequest, "edit request must carry an 'edits' array");
  EditRequest request;
  if (doc.contains("lambda")) {
    if (!doc["lambda"].is_number())
      fail(ErrorCode::BadRequest, "lambda must be a number");
    request.has_lambda = true;
    request.lambda = doc["lambda"].get<double>();
  }
  for (const json& edit : doc["edits"]) {
    if (!edit.is_object() || !edit.contains("pairs") || !edit["pairs"].is_array() ||
        edit["pairs"].empty())
      fail(ErrorCode::BadRequest, "each edit needs a non-empty 'pairs' array");
    const auto parse_side = [](const json& side, const char* what) {
      if (!side.is_object() || !side.contains("tokens") || !side.contains("tensor") ||
          !side["tokens"].is_array())
        fail(ErrorCode::BadRequest, std::string(what) + " needs 'tokens' and 'tensor'");
      PromptSpec prompt;
      for (const json& tok : side["tokens"]) {
        if (!tok.is_string()) fail(ErrorCode::BadRequest, "tokens must be strings");
        prompt.tokens.push_back(tok.get<std::string>());
      }
      prompt.tensor = side["tensor"].get<std::string>();
      return prompt;
    };
    std::vector<EditPairSpec> pairs;
    for (const json& pair : edit["pairs"]) {
      if (!pair.is_object() || !pair.contains("source") || !pair.contains("destination"))
        fail(ErrorCode::BadRequest, "each pair needs source and destination");
      EditPairSpec spec;
      spec.source = parse_side(pair["source"], "source");
      spec.destination = parse_side(pair["destination"], "destination");
      pairs.push_back(std::move(spec));
    }
    request.edits.push_back(std::move(pairs));
  }
  if (request.edits.empty()) fail(ErrorCode::BadRequest, "edit request has no edits");
  return request;
}

EmbeddingSequence embedding_sequence(const TensorFile& embeddings, const std::string& tensor,
                                     std::vector<std::string> tokens) {
  const Matrix rows = read_matrix(embeddings, tensor);
  if (!tokens.empty() && tokens.size() != rows.rows())
    fail(ErrorCode::BadRequest,
         "tensor '" + tensor + "' has " + std::to_string(rows.rows()) + " rows but " +
             std::to_string(tokens.size()) + " tokens were given");
  EmbeddingSequence seq;
  for (std::size_t i = 0; i < rows.rows(); ++i) {
    seq.tokens.push_back(tokens.empty() ? std::to_string(i) : std::move(tokens[i]));
    Vec embedding(rows.cols());
    for (std::size_t j = 0; j < rows.cols(); ++j) embedding[j] = rows(i, j);
    seq.embeddings.push_back(std::move(embedding));
  }
  seq.validate();
  return seq;
}

EmbeddingSequence embedding_sequence(const TensorFile& embeddings, const std::string& tensor) {
  return embedding_sequence(embeddings, tensor, {});
}

std::vector<EditContext> build_edit_contexts(const EditRequest& request,
                                             const TensorFile& embeddings, double lambda) {
  std::vector<EditContext> contexts;
  for (const auto& edit : request.edits) {
    std::vector<PromptPair> pairs;
    for (const EditPairSpec& spec : edit) {
      PromptPair pair;
      pair.source = embedding_sequence(embeddings, spec.source.tensor, spec.source.tokens);
      pair.destination =
          embedding_sequence(embeddings, spec.destination.tensor, spec.destination.tokens);
      pairs.push_back(std::move(pair));
    }
    contexts.push_back(build_context(pairs, lambda));
  }
  return contexts;
}

Feature mean_feature(const ModelWeights& model, const EmbeddingSequence& prompt,
                     const AttentionConfig& config, std::uint64_t base_seed,
                     std::size_t seeds) {
  if (seeds == 0) fail(ErrorCode::Empty, "seed count must be >= 1");
  Feature mean;
  for (std::size_t s = 0; s < seeds; ++s) {
    const Feature f = generate_feature(model, prompt, config, base_seed + s);
    if (mean.empty()) mean.assign(f.size(), 0.0);
    for (std::size_t i = 0; i < f.size(); ++i) mean[i] += f[i];
  }
  for (double& v : mean) v /= static_cast<double>(seeds);
  return mean;
}

SimEvalResult run_simulated_eval(const ModelWeights& reference_model,
                                 const ModelWeights& test_model,
                                 const TensorFile& embeddings,
                                 const std::vector<EvalEntry>& entries,
                                 const SimEvalOptions& options) {
  if (test_model.layers.empty() || reference_model.layers.empty())
    fail(ErrorCode::EmptyModel, "evaluation needs non-empty models");
  AttentionConfig config;
  config.key_dim = test_model.layers.front().w_k.rows();
  config.value_dim = test_model.layers.front().w_v.rows();
  config.embed_dim = test_model.layers.front().w_k.cols();
  config.query_count = options.query_count;
  config.seed = options.base_seed;

  SimEvalResult result;
  for (const EvalEntry& entry : entries) {
    struct Trial {
      const TestPair* pair;
      PromptKind kind;
    };
    std::vector<Trial> trials;
    trials.push_back({&entry.edit, PromptKind::Source});
    for (const TestPair& p : entry.positives) trials.push_back({&p, PromptKind::Positive});
    for (const TestPair& n : entry.negatives) trials.push_back({&n, PromptKind::Negative});

    for (const Trial& trial : trials) {
      const EmbeddingSequence source_seq = embedding_sequence(embeddings, trial.pair->source.tensor);
      const EmbeddingSequence dest_seq =
          embedding_sequence(embeddings, trial.pair->destination.tensor);
      const Feature source_ref =
          mean_feature(reference_model, source_seq, config, options.base_seed, options.seeds);
      const Feature dest_ref =
          mean_feature(reference_model, dest_seq, config, options.base_seed, options.seeds);

      TrialOutcome outcome;
      outcome.prompt_id = trial.pair->source.text;
      outcome.kind = trial.kind;
      outcome.classifications.reserve(options.seeds);
      for (std::size_t s = 0; s < options.seeds; ++s) {
        const Feature f = generate_feature(test_model, source_seq, config, options.base_seed + s);
        const Choice choice = classify(f, source_ref, dest_ref);
        outcome.classifications.push_back(choice == Choice::A ? Label::SourceLabel
                                                              : Label::DestinationLabel);
      }
      result.outcomes.push_back(std::move(outcome));
    }
  }
  result.report = aggregate(result.outcomes);
  return result;
}

}  // namespace timedit
