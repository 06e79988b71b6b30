#pragma once

#include <cstdint>
#include <string_view>

namespace timedit {

// Deterministic generator used everywhere randomness is needed, so that
// identical inputs produce identical files and reports on every platform.
//
// Stream definition (pinned; do not change without bumping the tool version):
//   state0 = splitmix64(seed)            (0 is remapped to a fixed constant)
//   next   = xorshift64star(state)       (shifts 12/25/27, multiplier
//                                         0x2545F4914F6CDD1D)
//   unit   = (next >> 11) * 2^-53        uniform in [0, 1)
//   normal = sum of 12 units - 6         Irwin-Hall approximation; uses only
//                                        IEEE-754 additions, so the stream is
//                                        bit-identical across platforms
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : state_(mix(seed)) {
    if (state_ == 0) state_ = 0x9E3779B97F4A7C15ull;
  }

  std::uint64_t next_u64() {
    state_ ^= state_ >> 12;
    state_ ^= state_ << 25;
    state_ ^= state_ >> 27;
    return state_ * 0x2545F4914F6CDD1Dull;
  }

  // Uniform in [0, 1), 53 mantissa bits.
  double next_unit() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  // Approximate standard normal (mean 0, variance 1).
  double next_normal() {
    double sum = 0.0;
    for (int i = 0; i < 12; ++i) sum += next_unit();
    return sum - 6.0;
  }

  static std::uint64_t mix(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ull;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
    return x ^ (x >> 31);
  }

 private:
  std::uint64_t state_;
};

// FNV-1a, used to derive stable seeds from strings and to digest input files.
inline std::uint64_t fnv1a64(std::string_view text) {
  std::uint64_t hash = 14695981039346656037ull;
  for (unsigned char c : text) {
    hash ^= c;
    hash *= 1099511628211ull;
  }
  return hash;
}

}  // namespace timedit
