#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>

#include <json.hpp>

#include "timedit/matrix.hpp"

namespace timedit {

// Deterministic synthetic world exercising the whole pipeline at desk scale:
// a small random model, token embeddings for a family of related prompts, an
// edit request (original pair plus three augmented variants), an evaluation
// dataset with five positive and five negative prompts, and a profession
// dataset for calibration.
struct DeskFixtureParams {
  std::size_t layers = 2;
  std::size_t embed_dim = 16;
  std::size_t key_dim = 12;
  std::size_t value_dim = 16;
  std::uint64_t seed = 7;
  double context_shift = 5.0;  // drift of shared tokens toward inserted ones
  double lambda = 0.1;
};

struct Fixture {
  std::map<std::string, Matrix> checkpoint;  // tensor name -> matrix
  std::map<std::string, Matrix> embeddings;  // prompt text -> l x c rows
  nlohmann::json edit_request;
  nlohmann::json eval_dataset;
  nlohmann::json professions;
};

Fixture make_desk_fixture(const DeskFixtureParams& params = {});

// Writes model.safetensors, embeddings.safetensors, edit.json, eval.json and
// professions.json into dir.
void write_fixture(const Fixture& fixture, const std::filesystem::path& dir);

// A 16-layer checkpoint whose key/value projection shapes follow the usual
// latent-diffusion backbone scaled down by scale_divisor, plus one passthrough
// blob sized so the projections make up ~2.2% of all parameters.
std::map<std::string, Matrix> make_backbone_checkpoint(std::size_t scale_divisor = 16,
                                                       std::uint64_t seed = 11);

}  // namespace timedit
