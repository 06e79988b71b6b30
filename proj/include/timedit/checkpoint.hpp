#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "timedit/edit.hpp"
#include "timedit/tensor_store.hpp"

namespace timedit {

// How cross-attention projection tensors are located inside a checkpoint:
// names ending in the two suffixes, paired by their shared prefix. transpose
// covers checkpoints that store c x out instead of out x c.
struct LayerPatterns {
  std::string key_suffix = ".attn2.to_k.weight";
  std::string value_suffix = ".attn2.to_v.weight";
  bool transpose = false;
};

struct LayerRef {
  std::string prefix;
  std::string key_name;
  std::string value_name;
  Dtype key_dtype = Dtype::F32;
  Dtype value_dtype = Dtype::F32;
};

struct CheckpointLayers {
  std::vector<LayerRef> refs;            // sorted by prefix
  std::vector<std::string> unpaired;     // pattern hits without a partner
  ModelWeights model;                    // decoded, out x c orientation
  LayerPatterns patterns;
};

CheckpointLayers discover_layers(const TensorFile& file, const LayerPatterns& patterns = {});

struct EditStats {
  std::uint64_t edited_parameters = 0;
  std::uint64_t total_parameters = 0;
  double fraction = 0.0;
};

// prefix_filter restricts the denominator to tensor names starting with it
// (useful when a checkpoint bundles more than the denoiser weights).
EditStats edit_stats(const TensorFile& file, const CheckpointLayers& layers,
                     const std::string& prefix_filter = {});

// Rebuilds the container with the edited projections re-encoded in their
// original dtype and orientation; every other tensor's payload is carried
// through byte-for-byte. Metadata is preserved.
std::vector<std::uint8_t> save_with_layers(const TensorFile& original,
                                           const CheckpointLayers& layers,
                                           const ModelWeights& edited);

}  // namespace timedit
