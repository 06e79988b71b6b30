#include "timedit/tensor_store.hpp"

#include <algorithm>
#include <bit>
#include <cstring>
#include <fstream>
#include <limits>

#include <json.hpp>

namespace timedit {

namespace {

using nlohmann::json;

std::uint64_t read_u64_le(const std::uint8_t* p) {
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(p[i]) << (8 * i);
  return v;
}

void append_u64_le(std::vector<std::uint8_t>& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

Dtype parse_dtype(const std::string& name) {
  if (name == "F32") return Dtype::F32;
  if (name == "F64") return Dtype::F64;
  fail(ErrorCode::UnsupportedDtype, "dtype '" + name + "' (only F32/F64 are supported)");
}

// Checked product; a tensor whose element count overflows u64 can never have
// consistent offsets anyway.
std::uint64_t checked_element_count(const std::vector<std::uint64_t>& shape) {
  std::uint64_t count = 1;
  for (std::uint64_t dim : shape) {
    if (dim != 0 && count > std::numeric_limits<std::uint64_t>::max() / dim)
      fail(ErrorCode::ShapeSizeMismatch, "shape element product overflows");
    count *= dim;
  }
  return count;
}

}  // namespace

std::size_t dtype_size(Dtype dtype) { return dtype == Dtype::F32 ? 4 : 8; }

std::string_view dtype_name(Dtype dtype) { return dtype == Dtype::F32 ? "F32" : "F64"; }

std::uint64_t TensorHeaderEntry::element_count() const {
  return checked_element_count(shape);
}

TensorFile::TensorFile(std::vector<TensorHeaderEntry> entries,
                       std::optional<std::map<std::string, std::string>> metadata,
                       std::vector<std::uint8_t> data)
    : entries_(std::move(entries)), metadata_(std::move(metadata)), data_(std::move(data)) {}

const TensorHeaderEntry* TensorFile::find(std::string_view name) const {
  for (const auto& entry : entries_)
    if (entry.name == name) return &entry;
  return nullptr;
}

std::span<const std::uint8_t> TensorFile::payload(const TensorHeaderEntry& entry) const {
  return std::span<const std::uint8_t>(data_.data() + entry.begin, entry.byte_count());
}

TensorFile parse_file(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 8)
    fail(ErrorCode::MalformedHeader, "file shorter than the 8-byte length prefix");
  const std::uint64_t header_len = read_u64_le(bytes.data());
  if (header_len > kMaxHeaderBytes)
    fail(ErrorCode::MalformedHeader, "header length exceeds 100 MB cap");
  if (header_len > bytes.size() - 8)
    fail(ErrorCode::MalformedHeader, "header length exceeds file size");

  json header;
  try {
    header = json::parse(bytes.begin() + 8, bytes.begin() + 8 + header_len);
  } catch (const json::exception& e) {
    fail(ErrorCode::MalformedHeader, std::string("header is not valid JSON: ") + e.what());
  }
  if (!header.is_object()) fail(ErrorCode::MalformedHeader, "header is not a JSON object");

  const std::uint64_t data_len = bytes.size() - 8 - header_len;

  std::vector<TensorHeaderEntry> entries;
  std::optional<std::map<std::string, std::string>> metadata;

  for (const auto& [name, value] : header.items()) {
    if (name == "__metadata__") {
      if (!value.is_object())
        fail(ErrorCode::MalformedHeader, "__metadata__ is not an object");
      std::map<std::string, std::string> meta;
      for (const auto& [k, v] : value.items()) {
        if (!v.is_string())
          fail(ErrorCode::MalformedHeader, "__metadata__ values must be strings");
        meta[k] = v.get<std::string>();
      }
      metadata = std::move(meta);
      continue;
    }
    if (!value.is_object())
      fail(ErrorCode::MalformedHeader, "entry '" + name + "' is not an object");
    if (!value.contains("dtype") || !value.contains("shape") || !value.contains("data_offsets"))
      fail(ErrorCode::MalformedHeader, "entry '" + name + "' misses a required key");
    if (value.size() != 3)
      fail(ErrorCode::MalformedHeader, "entry '" + name + "' has unexpected keys");
    if (!value["dtype"].is_string())
      fail(ErrorCode::MalformedHeader, "dtype of '" + name + "' is not a string");

    TensorHeaderEntry entry;
    entry.name = name;
    entry.dtype = parse_dtype(value["dtype"].get<std::string>());

    const json& shape = value["shape"];
    if (!shape.is_array())
      fail(ErrorCode::MalformedHeader, "shape of '" + name + "' is not an array");
    for (const json& dim : shape) {
      if (!dim.is_number_unsigned())
        fail(ErrorCode::MalformedHeader,
             "shape of '" + name + "' contains a non-unsigned entry");
      entry.shape.push_back(dim.get<std::uint64_t>());
    }

    const json& offsets = value["data_offsets"];
    if (!offsets.is_array() || offsets.size() != 2 || !offsets[0].is_number_unsigned() ||
        !offsets[1].is_number_unsigned())
      fail(ErrorCode::MalformedHeader, "data_offsets of '" + name + "' is not a [u64, u64] pair");
    entry.begin = offsets[0].get<std::uint64_t>();
    entry.end = offsets[1].get<std::uint64_t>();
    if (entry.end < entry.begin)
      fail(ErrorCode::MalformedHeader, "data_offsets of '" + name + "' are reversed");
    if (entry.end > data_len)
      fail(ErrorCode::MalformedHeader, "data_offsets of '" + name + "' exceed the data region");

    const std::uint64_t expected = entry.element_count() * dtype_size(entry.dtype);
    if (entry.byte_count() != expected)
      fail(ErrorCode::ShapeSizeMismatch,
           "tensor '" + name + "': offsets span " + std::to_string(entry.byte_count()) +
               " bytes, shape needs " + std::to_string(expected));

    entries.push_back(std::move(entry));
  }

  // Non-empty payload intervals must not overlap.
  std::vector<const TensorHeaderEntry*> spans;
  for (const auto& e : entries)
    if (e.byte_count() > 0) spans.push_back(&e);
  std::sort(spans.begin(), spans.end(),
            [](const auto* a, const auto* b) { return a->begin < b->begin; });
  for (std::size_t i = 1; i < spans.size(); ++i) {
    if (spans[i]->begin < spans[i - 1]->end)
      fail(ErrorCode::OverlappingOffsets,
           "tensors '" + spans[i - 1]->name + "' and '" + spans[i]->name + "' overlap");
  }

  std::vector<std::uint8_t> data(bytes.begin() + 8 + header_len, bytes.end());
  return TensorFile(std::move(entries), std::move(metadata), std::move(data));
}

Matrix read_matrix(const TensorFile& file, std::string_view name) {
  const TensorHeaderEntry* entry = file.find(name);
  if (!entry) fail(ErrorCode::NotFound, "tensor '" + std::string(name) + "'");
  if (entry->shape.size() != 2)
    fail(ErrorCode::NotAMatrix,
         "tensor '" + std::string(name) + "' has rank " + std::to_string(entry->shape.size()));
  TensorPayload payload;
  payload.dtype = entry->dtype;
  payload.shape = entry->shape;
  const auto span = file.payload(*entry);
  payload.bytes.assign(span.begin(), span.end());
  return decode_matrix(payload);
}

Matrix decode_matrix(const TensorPayload& payload) {
  if (payload.shape.size() != 2) fail(ErrorCode::NotAMatrix, "payload is not rank 2");
  const std::size_t rows = payload.shape[0];
  const std::size_t cols = payload.shape[1];
  Matrix out(rows, cols);
  const std::uint8_t* p = payload.bytes.data();
  if (payload.dtype == Dtype::F32) {
    for (std::size_t i = 0; i < rows * cols; ++i) {
      std::uint32_t bits = 0;
      std::memcpy(&bits, p + 4 * i, 4);
      out.values()[i] = static_cast<double>(std::bit_cast<float>(bits));
    }
  } else {
    for (std::size_t i = 0; i < rows * cols; ++i) {
      std::uint64_t bits = 0;
      std::memcpy(&bits, p + 8 * i, 8);
      out.values()[i] = std::bit_cast<double>(bits);
    }
  }
  return out;
}

TensorPayload encode_matrix(const Matrix& matrix, Dtype dtype) {
  if (!all_finite(matrix)) fail(ErrorCode::NonFiniteValue, "matrix contains non-finite values");
  TensorPayload payload;
  payload.dtype = dtype;
  payload.shape = {matrix.rows(), matrix.cols()};
  payload.bytes.resize(matrix.size() * dtype_size(dtype));
  std::uint8_t* p = payload.bytes.data();
  if (dtype == Dtype::F32) {
    for (std::size_t i = 0; i < matrix.size(); ++i) {
      const float narrowed = static_cast<float>(matrix.values()[i]);
      if (!std::isfinite(narrowed))
        fail(ErrorCode::NonFiniteValue, "value overflows F32 range");
      const std::uint32_t bits = std::bit_cast<std::uint32_t>(narrowed);
      std::memcpy(p + 4 * i, &bits, 4);
    }
  } else {
    for (std::size_t i = 0; i < matrix.size(); ++i) {
      const std::uint64_t bits = std::bit_cast<std::uint64_t>(matrix.values()[i]);
      std::memcpy(p + 8 * i, &bits, 8);
    }
  }
  return payload;
}

std::vector<std::uint8_t> write_payloads(
    const std::map<std::string, TensorPayload>& tensors,
    const std::optional<std::map<std::string, std::string>>& metadata) {
  json header = json::object();
  std::uint64_t offset = 0;
  for (const auto& [name, payload] : tensors) {
    json entry;
    entry["dtype"] = std::string(dtype_name(payload.dtype));
    entry["shape"] = payload.shape;
    const std::uint64_t expected = checked_element_count(payload.shape) *
                                   dtype_size(payload.dtype);
    if (expected != payload.bytes.size())
      fail(ErrorCode::ShapeSizeMismatch, "payload size does not match shape for '" + name + "'");
    entry["data_offsets"] = {offset, offset + payload.bytes.size()};
    header[name] = std::move(entry);
    offset += payload.bytes.size();
  }
  if (metadata) {
    json meta = json::object();
    for (const auto& [k, v] : *metadata) meta[k] = v;
    header["__metadata__"] = std::move(meta);
  }

  std::string text = header.dump();
  while (text.size() % 8 != 0) text.push_back(' ');

  std::vector<std::uint8_t> out;
  out.reserve(8 + text.size() + offset);
  append_u64_le(out, text.size());
  out.insert(out.end(), text.begin(), text.end());
  for (const auto& [name, payload] : tensors)
    out.insert(out.end(), payload.bytes.begin(), payload.bytes.end());
  return out;
}

std::vector<std::uint8_t> write_file(
    const std::map<std::string, Matrix>& tensors, Dtype dtype,
    const std::optional<std::map<std::string, std::string>>& metadata) {
  std::map<std::string, TensorPayload> payloads;
  for (const auto& [name, matrix] : tensors) payloads[name] = encode_matrix(matrix, dtype);
  return write_payloads(payloads, metadata);
}

std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::IoError, "cannot open '" + path.string() + "'");
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                  std::istreambuf_iterator<char>());
  if (in.bad()) fail(ErrorCode::IoError, "read failed for '" + path.string() + "'");
  return bytes;
}

void write_file_bytes(const std::filesystem::path& path,
                      std::span<const std::uint8_t> bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(ErrorCode::IoError, "cannot create '" + path.string() + "'");
  out.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
  if (!out) fail(ErrorCode::IoError, "write failed for '" + path.string() + "'");
}

TensorFile load_tensor_file(const std::filesystem::path& path) {
  const auto bytes = read_file_bytes(path);
  return parse_file(bytes);
}

}  // namespace timedit
