#include "timedit/checkpoint.hpp"

#include <algorithm>
#include <map>

namespace timedit {

namespace {

bool ends_with(const std::string& s, const std::string& suffix) {
  return s.size() >= suffix.size() &&
         s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
}

}  // namespace

CheckpointLayers discover_layers(const TensorFile& file, const LayerPatterns& patterns) {
  std::map<std::string, const TensorHeaderEntry*> keys;
  std::map<std::string, const TensorHeaderEntry*> values;
  for (const TensorHeaderEntry& entry : file.entries()) {
    if (ends_with(entry.name, patterns.key_suffix))
      keys[entry.name.substr(0, entry.name.size() - patterns.key_suffix.size())] = &entry;
    else if (ends_with(entry.name, patterns.value_suffix))
      values[entry.name.substr(0, entry.name.size() - patterns.value_suffix.size())] = &entry;
  }

  CheckpointLayers out;
  out.patterns = patterns;
  for (const auto& [prefix, key_entry] : keys) {
    auto it = values.find(prefix);
    if (it == values.end()) {
      out.unpaired.push_back(key_entry->name);
      continue;
    }
    LayerRef ref;
    ref.prefix = prefix;
    ref.key_name = key_entry->name;
    ref.value_name = it->second->name;
    ref.key_dtype = key_entry->dtype;
    ref.value_dtype = it->second->dtype;
    out.refs.push_back(std::move(ref));
  }
  for (const auto& [prefix, value_entry] : values)
    if (!keys.count(prefix)) out.unpaired.push_back(value_entry->name);
  std::sort(out.unpaired.begin(), out.unpaired.end());

  for (const LayerRef& ref : out.refs) {
    LayerWeights layer;
    layer.layer_name = ref.prefix;
    layer.w_k = read_matrix(file, ref.key_name);
    layer.w_v = read_matrix(file, ref.value_name);
    if (patterns.transpose) {
      layer.w_k = transpose(layer.w_k);
      layer.w_v = transpose(layer.w_v);
    }
    if (layer.w_k.cols() != layer.w_v.cols())
      fail(ErrorCode::DimensionMismatch,
           "key and value projections of '" + ref.prefix + "' disagree on embedding dim");
    out.model.layers.push_back(std::move(layer));
  }
  return out;
}

EditStats edit_stats(const TensorFile& file, const CheckpointLayers& layers,
                     const std::string& prefix_filter) {
  EditStats stats;
  for (const TensorHeaderEntry& entry : file.entries()) {
    if (!prefix_filter.empty() && entry.name.rfind(prefix_filter, 0) != 0) continue;
    stats.total_parameters += entry.element_count();
  }
  for (const LayerRef& ref : layers.refs) {
    stats.edited_parameters += file.find(ref.key_name)->element_count();
    stats.edited_parameters += file.find(ref.value_name)->element_count();
  }
  stats.fraction = stats.total_parameters == 0
                       ? 0.0
                       : static_cast<double>(stats.edited_parameters) /
                             static_cast<double>(stats.total_parameters);
  return stats;
}

std::vector<std::uint8_t> save_with_layers(const TensorFile& original,
                                           const CheckpointLayers& layers,
                                           const ModelWeights& edited) {
  if (edited.layers.size() != layers.refs.size())
    fail(ErrorCode::DimensionMismatch, "edited layer count != discovered layer count");

  std::map<std::string, const Matrix*> replacements;
  std::map<std::string, Dtype> replacement_dtypes;
  for (std::size_t i = 0; i < layers.refs.size(); ++i) {
    const LayerRef& ref = layers.refs[i];
    replacements[ref.key_name] = &edited.layers[i].w_k;
    replacements[ref.value_name] = &edited.layers[i].w_v;
    replacement_dtypes[ref.key_name] = ref.key_dtype;
    replacement_dtypes[ref.value_name] = ref.value_dtype;
  }

  std::map<std::string, TensorPayload> payloads;
  for (const TensorHeaderEntry& entry : original.entries()) {
    auto it = replacements.find(entry.name);
    if (it == replacements.end()) {
      TensorPayload payload;
      payload.dtype = entry.dtype;
      payload.shape = entry.shape;
      const auto span = original.payload(entry);
      payload.bytes.assign(span.begin(), span.end());
      payloads[entry.name] = std::move(payload);
    } else {
      const Matrix& matrix = *it->second;
      const Matrix oriented = layers.patterns.transpose ? transpose(matrix) : matrix;
      payloads[entry.name] = encode_matrix(oriented, replacement_dtypes[entry.name]);
    }
  }
  return write_payloads(payloads, original.metadata());
}

}  // namespace timedit
