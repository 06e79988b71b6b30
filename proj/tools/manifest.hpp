#pragma once

#include <cstdio>
#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "timedit/rng.hpp"
#include "timedit/tensor_store.hpp"
#include "timedit/version.hpp"

namespace timedit::cli {

// Every command that writes an output drops a sibling <out>.manifest.json
// recording the resolved parameters and input digests, enough to reproduce
// the run bit for bit.
inline std::string file_digest(const std::filesystem::path& path) {
  const auto bytes = read_file_bytes(path);
  const std::uint64_t digest = fnv1a64(
      std::string_view(reinterpret_cast<const char*>(bytes.data()), bytes.size()));
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(digest));
  return buf;
}

inline void write_manifest(const std::filesystem::path& out_path, const std::string& command,
                           const nlohmann::json& parameters,
                           const std::vector<std::filesystem::path>& inputs) {
  nlohmann::json manifest;
  manifest["schema_version"] = 1;
  manifest["tool"] = "timedit";
  manifest["version"] = kVersion;
  manifest["command"] = command;
  manifest["parameters"] = parameters;
  manifest["inputs"] = nlohmann::json::array();
  for (const auto& input : inputs)
    manifest["inputs"].push_back({{"path", input.string()}, {"fnv1a64", file_digest(input)}});
  manifest["output"] = out_path.string();

  const std::string text = manifest.dump(2) + "\n";
  const std::filesystem::path manifest_path = out_path.string() + ".manifest.json";
  write_file_bytes(manifest_path,
                   std::span<const std::uint8_t>(
                       reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

}  // namespace timedit::cli
