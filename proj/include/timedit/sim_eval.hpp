#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "timedit/attention.hpp"
#include "timedit/edit.hpp"
#include "timedit/eval.hpp"
#include "timedit/tensor_store.hpp"

namespace timedit {

// A prompt reference in a dataset or edit request: display text plus the name
// of its embedding tensor (an l x c matrix). A bare JSON string means the
// text doubles as the tensor name.
struct PromptRef {
  std::string text;
  std::string tensor;
};

struct TestPair {
  PromptRef source;
  PromptRef destination;
};

struct EvalEntry {
  TestPair edit;
  std::vector<TestPair> positives;
  std::vector<TestPair> negatives;
};

std::vector<EvalEntry> parse_eval_dataset(const nlohmann::json& doc);

// Edit request file:
// { "lambda": 0.1,
//   "edits": [ { "pairs": [ { "source": {"tokens": [...], "tensor": "..."},
//                             "destination": {...} }, ... ] } ] }
struct PromptSpec {
  std::vector<std::string> tokens;
  std::string tensor;
};

struct EditPairSpec {
  PromptSpec source;
  PromptSpec destination;
};

struct EditRequest {
  std::vector<std::vector<EditPairSpec>> edits;
  bool has_lambda = false;
  double lambda = 0.0;
};

EditRequest parse_edit_request(const nlohmann::json& doc);

// Looks a prompt's embedding matrix up and turns rows into an
// EmbeddingSequence. Tokens default to row indices when none are given.
EmbeddingSequence embedding_sequence(const TensorFile& embeddings, const std::string& tensor);
EmbeddingSequence embedding_sequence(const TensorFile& embeddings, const std::string& tensor,
                                     std::vector<std::string> tokens);

std::vector<EditContext> build_edit_contexts(const EditRequest& request,
                                             const TensorFile& embeddings, double lambda);

struct SimEvalOptions {
  std::size_t seeds = 24;
  std::size_t query_count = 8;
  std::uint64_t base_seed = 1;
};

struct SimEvalResult {
  EvalReport report;
  std::vector<TrialOutcome> outcomes;
};

// Features for every test prompt of every entry across seeds, classified
// against seed-averaged reference features taken from the reference model on
// the pair's source and destination prompts.
SimEvalResult run_simulated_eval(const ModelWeights& reference_model,
                                 const ModelWeights& test_model,
                                 const TensorFile& embeddings,
                                 const std::vector<EvalEntry>& entries,
                                 const SimEvalOptions& options);

Feature mean_feature(const ModelWeights& model, const EmbeddingSequence& prompt,
                     const AttentionConfig& config, std::uint64_t base_seed,
                     std::size_t seeds);

}  // namespace timedit
