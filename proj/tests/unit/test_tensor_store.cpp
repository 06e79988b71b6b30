#include <cstring>
#include <doctest.h>
#include <string>
#include <vector>

#include "helpers.hpp"
#include "timedit/tensor_store.hpp"

using namespace timedit;

namespace {

// Handcrafted container: length prefix + verbatim header text + payload.
std::vector<std::uint8_t> craft(const std::string& header, std::size_t payload_bytes) {
  std::vector<std::uint8_t> bytes;
  const std::uint64_t len = header.size();
  for (int i = 0; i < 8; ++i) bytes.push_back(static_cast<std::uint8_t>(len >> (8 * i)));
  bytes.insert(bytes.end(), header.begin(), header.end());
  bytes.resize(bytes.size() + payload_bytes, 0);
  return bytes;
}

std::vector<std::uint8_t> identity_2x2_file() {
  std::map<std::string, Matrix> tensors{{"W", Matrix::identity(2)}};
  return write_file(tensors, Dtype::F32);
}

}  // namespace

TEST_CASE("parse_file: minimal single-tensor file") {
  const auto bytes =
      craft(R"({"W":{"dtype":"F32","shape":[2,2],"data_offsets":[0,16]}})", 16);
  const TensorFile file = parse_file(bytes);
  REQUIRE(file.entries().size() == 1);
  CHECK(file.entries()[0].name == "W");
  CHECK(file.entries()[0].shape == std::vector<std::uint64_t>{2, 2});
  const Matrix w = read_matrix(file, "W");
  CHECK(w.rows() == 2);
  CHECK(w(0, 0) == 0.0);
}

TEST_CASE("parse_file: offsets inconsistent with the shape") {
  const auto bytes =
      craft(R"({"W":{"dtype":"F32","shape":[2,2],"data_offsets":[0,12]}})", 12);
  CHECK_FAILS_WITH(parse_file(bytes), ErrorCode::ShapeSizeMismatch);
}

TEST_CASE("parse_file: overlapping tensors") {
  const auto bytes = craft(
      R"({"A":{"dtype":"F32","shape":[2,2],"data_offsets":[0,16],},"B":{"dtype":"F32","shape":[2,2],"data_offsets":[8,24]}})",
      24);
  // the stray comma above also exercises the JSON error path; build a clean one
  const auto clean = craft(
      R"({"A":{"dtype":"F32","shape":[2,2],"data_offsets":[0,16]},"B":{"dtype":"F32","shape":[2,2],"data_offsets":[8,24]}})",
      24);
  CHECK_FAILS_WITH(parse_file(bytes), ErrorCode::MalformedHeader);
  CHECK_FAILS_WITH(parse_file(clean), ErrorCode::OverlappingOffsets);
}

TEST_CASE("parse_file: unsupported dtypes are rejected") {
  for (const char* dtype : {"F16", "BF16", "I64", "U8"}) {
    const std::string header = std::string(R"({"W":{"dtype":")") + dtype +
                               R"(","shape":[2,2],"data_offsets":[0,16]}})";
    CHECK_FAILS_WITH(parse_file(craft(header, 16)), ErrorCode::UnsupportedDtype);
  }
}

TEST_CASE("parse_file: malformed headers never pass") {
  // 200 MB claimed header on a tiny file
  std::vector<std::uint8_t> huge(16, 0);
  const std::uint64_t claim = 200ull * 1024 * 1024;
  std::memcpy(huge.data(), &claim, 8);
  CHECK_FAILS_WITH(parse_file(huge), ErrorCode::MalformedHeader);

  CHECK_FAILS_WITH(parse_file(std::vector<std::uint8_t>{1, 2, 3}), ErrorCode::MalformedHeader);
  CHECK_FAILS_WITH(parse_file(craft("[1,2,3]", 0)), ErrorCode::MalformedHeader);
  CHECK_FAILS_WITH(parse_file(craft("{\"W\":\xff\xfe}", 0)), ErrorCode::MalformedHeader);
  CHECK_FAILS_WITH(parse_file(craft(R"({"W":{"dtype":"F32","shape":[2,2]}})", 16)),
                   ErrorCode::MalformedHeader);
  CHECK_FAILS_WITH(
      parse_file(craft(
          R"({"W":{"dtype":"F32","shape":[2,2],"data_offsets":[0,16],"extra":1}})", 16)),
      ErrorCode::MalformedHeader);
  CHECK_FAILS_WITH(
      parse_file(craft(R"({"W":{"dtype":"F32","shape":[2,2],"data_offsets":[16,0]}})", 16)),
      ErrorCode::MalformedHeader);
  CHECK_FAILS_WITH(
      parse_file(craft(R"({"W":{"dtype":"F32","shape":[2,2],"data_offsets":[0,16]}})", 8)),
      ErrorCode::MalformedHeader);
  CHECK_FAILS_WITH(
      parse_file(craft(R"({"W":{"dtype":"F32","shape":[-2,2],"data_offsets":[0,16]}})", 16)),
      ErrorCode::MalformedHeader);
  CHECK_FAILS_WITH(parse_file(craft(R"({"__metadata__":{"k":1}})", 0)),
                   ErrorCode::MalformedHeader);
}

TEST_CASE("parse_file: scalars and zero-sized tensors") {
  const auto scalar = craft(R"({"s":{"dtype":"F32","shape":[],"data_offsets":[0,4]}})", 4);
  CHECK(parse_file(scalar).entries()[0].element_count() == 1);

  const auto empty = craft(
      R"({"a":{"dtype":"F32","shape":[0,4],"data_offsets":[0,0]},"b":{"dtype":"F32","shape":[0,2],"data_offsets":[0,0]}})",
      0);
  CHECK(parse_file(empty).entries().size() == 2);  // empty spans never overlap
}

TEST_CASE("read_matrix: identity, missing names, wrong rank") {
  const TensorFile file = parse_file(identity_2x2_file());
  const Matrix w = read_matrix(file, "W");
  CHECK(w == Matrix::identity(2));
  CHECK_FAILS_WITH(read_matrix(file, "missing"), ErrorCode::NotFound);

  const auto rank1 = craft(R"({"v":{"dtype":"F64","shape":[3],"data_offsets":[0,24]}})", 24);
  CHECK_FAILS_WITH(read_matrix(parse_file(rank1), "v"), ErrorCode::NotAMatrix);
}

TEST_CASE("write_file/read_matrix: F64 round trip is bitwise") {
  Rng rng(31);
  Matrix m = testutil::random_matrix(rng, 3, 5);
  const auto bytes = write_file({{"m", m}}, Dtype::F64);
  const Matrix back = read_matrix(parse_file(bytes), "m");
  CHECK(back == m);
}

TEST_CASE("write_file: deterministic byte output") {
  Rng rng(32);
  std::map<std::string, Matrix> tensors;
  tensors["zeta"] = testutil::random_matrix(rng, 2, 3);
  tensors["alpha"] = testutil::random_matrix(rng, 4, 1);
  const std::map<std::string, std::string> meta{{"purpose", "test"}};
  const auto once = write_file(tensors, Dtype::F32, meta);
  const auto twice = write_file(tensors, Dtype::F32, meta);
  CHECK(once == twice);
  // header length padded to an 8-byte boundary
  std::uint64_t header_len = 0;
  std::memcpy(&header_len, once.data(), 8);
  CHECK(header_len % 8 == 0);
}

TEST_CASE("write_file: metadata survives the round trip") {
  const std::map<std::string, std::string> meta{{"a", "1"}, {"b", "two"}};
  const auto bytes = write_file({{"W", Matrix::identity(2)}}, Dtype::F32, meta);
  const TensorFile file = parse_file(bytes);
  REQUIRE(file.metadata().has_value());
  CHECK(file.metadata()->at("b") == "two");
}

TEST_CASE("write_file: non-finite values are rejected") {
  Matrix bad = Matrix::identity(2);
  bad(0, 1) = std::numeric_limits<double>::quiet_NaN();
  CHECK_FAILS_WITH(write_file({{"W", bad}}, Dtype::F32), ErrorCode::NonFiniteValue);

  Matrix overflow = Matrix::identity(2);
  overflow(0, 0) = 1e300;  // exceeds F32 range after narrowing
  CHECK_FAILS_WITH(write_file({{"W", overflow}}, Dtype::F32), ErrorCode::NonFiniteValue);
  CHECK_NOTHROW(write_file({{"W", overflow}}, Dtype::F64));
}

TEST_CASE("round trip: random matrix maps survive write/parse/read") {
  Rng rng(33);
  for (int trial = 0; trial < 10; ++trial) {
    std::map<std::string, Matrix> tensors;
    const std::size_t count = 1 + rng.next_u64() % 4;
    for (std::size_t i = 0; i < count; ++i)
      tensors["t" + std::to_string(i)] =
          testutil::random_matrix(rng, 1 + rng.next_u64() % 5, 1 + rng.next_u64() % 5);
    const Dtype dtype = trial % 2 == 0 ? Dtype::F64 : Dtype::F32;
    const TensorFile file = parse_file(write_file(tensors, dtype));
    for (const auto& [name, matrix] : tensors) {
      const Matrix back = read_matrix(file, name);
      if (dtype == Dtype::F64) {
        CHECK(back == matrix);
      } else {
        // F32 storage: equal after one narrowing pass
        Matrix narrowed = matrix;
        for (double& v : narrowed.values()) v = static_cast<double>(static_cast<float>(v));
        CHECK(back == narrowed);
      }
    }
  }
}

TEST_CASE("fuzz: mutated files either parse or raise typed errors") {
  Rng rng(34);
  std::map<std::string, Matrix> tensors{{"weights.a", Matrix::identity(3)},
                                        {"weights.b", testutil::random_matrix(rng, 2, 4)}};
  const auto valid = write_file(tensors, Dtype::F32,
                                std::map<std::string, std::string>{{"k", "v"}});
  CHECK_NOTHROW(parse_file(valid));

  // every truncation
  for (std::size_t len = 0; len < valid.size(); ++len) {
    std::vector<std::uint8_t> cut(valid.begin(), valid.begin() + len);
    try {
      (void)parse_file(cut);
    } catch (const Error&) {
    }
  }
  // every single-byte flip
  for (std::size_t i = 0; i < valid.size(); ++i) {
    for (std::uint8_t delta : {0x01, 0x80}) {
      std::vector<std::uint8_t> mutated = valid;
      mutated[i] = static_cast<std::uint8_t>(mutated[i] ^ delta);
      try {
        (void)parse_file(mutated);
      } catch (const Error&) {
      }
    }
  }
  // random multi-byte garbage
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<std::uint8_t> mutated = valid;
    const std::size_t edits = 1 + rng.next_u64() % 8;
    for (std::size_t e = 0; e < edits; ++e)
      mutated[rng.next_u64() % mutated.size()] = static_cast<std::uint8_t>(rng.next_u64());
    try {
      (void)parse_file(mutated);
    } catch (const Error&) {
    }
  }
}
