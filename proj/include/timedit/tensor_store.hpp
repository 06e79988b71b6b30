#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "timedit/matrix.hpp"

namespace timedit {

// Reader/writer for the safetensors container:
//   [u64 little-endian header byte length]
//   [JSON header: tensor name -> {dtype, shape, data_offsets},
//    plus an optional "__metadata__" string map]
//   [data region; offsets are relative to its start]
//
// Only F32 and F64 payloads are supported. Serialization is canonical: names
// sorted lexicographically, compact JSON, data laid out in name order, header
// padded with trailing spaces to an 8-byte boundary. Writing the same input
// twice yields identical bytes.

enum class Dtype { F32, F64 };

std::size_t dtype_size(Dtype dtype);
std::string_view dtype_name(Dtype dtype);

// Headers larger than this are rejected before any allocation happens.
inline constexpr std::uint64_t kMaxHeaderBytes = 100ull * 1024 * 1024;

struct TensorHeaderEntry {
  std::string name;
  Dtype dtype = Dtype::F32;
  std::vector<std::uint64_t> shape;  // empty means scalar
  std::uint64_t begin = 0;
  std::uint64_t end = 0;

  std::uint64_t element_count() const;
  std::uint64_t byte_count() const { return end - begin; }
};

class TensorFile {
 public:
  TensorFile() = default;
  TensorFile(std::vector<TensorHeaderEntry> entries,
             std::optional<std::map<std::string, std::string>> metadata,
             std::vector<std::uint8_t> data);

  const std::vector<TensorHeaderEntry>& entries() const { return entries_; }
  const std::optional<std::map<std::string, std::string>>& metadata() const {
    return metadata_;
  }
  const std::vector<std::uint8_t>& data() const { return data_; }

  const TensorHeaderEntry* find(std::string_view name) const;
  std::span<const std::uint8_t> payload(const TensorHeaderEntry& entry) const;

 private:
  std::vector<TensorHeaderEntry> entries_;
  std::optional<std::map<std::string, std::string>> metadata_;
  std::vector<std::uint8_t> data_;
};

TensorFile parse_file(std::span<const std::uint8_t> bytes);

// Widens F32 payloads to doubles exactly; rank-2 tensors only.
Matrix read_matrix(const TensorFile& file, std::string_view name);

std::vector<std::uint8_t> write_file(
    const std::map<std::string, Matrix>& tensors, Dtype dtype,
    const std::optional<std::map<std::string, std::string>>& metadata = std::nullopt);

// Raw-payload writer used when a file is rebuilt with some tensors replaced
// and the rest carried through byte-for-byte.
struct TensorPayload {
  Dtype dtype = Dtype::F32;
  std::vector<std::uint64_t> shape;
  std::vector<std::uint8_t> bytes;
};

std::vector<std::uint8_t> write_payloads(
    const std::map<std::string, TensorPayload>& tensors,
    const std::optional<std::map<std::string, std::string>>& metadata = std::nullopt);

TensorPayload encode_matrix(const Matrix& matrix, Dtype dtype);
Matrix decode_matrix(const TensorPayload& payload);

// Whole-file helpers.
std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path);
void write_file_bytes(const std::filesystem::path& path,
                      std::span<const std::uint8_t> bytes);
TensorFile load_tensor_file(const std::filesystem::path& path);

}  // namespace timedit
