#pragma once

#include <cstdint>
#include <random>

namespace mjp {

// Deterministic per-path stream: path i draws from a generator seeded by
// mixing (base_seed, i), so estimates are independent of scheduling.
class RngStream {
 public:
  RngStream(std::uint64_t base_seed, std::uint64_t stream_id)
      : gen_(mix(base_seed, stream_id)) {}

  std::uint64_t raw() { return gen_(); }

  // strictly inside (0,1); 53-bit resolution
  double uniform01() {
    return (static_cast<double>(gen_() >> 11) + 0.5) * 0x1.0p-53;
  }

  // unit exponential via inversion
  double exponential() { return -std::log(uniform01()); }

  static std::uint64_t mix(std::uint64_t base, std::uint64_t stream) {
    std::uint64_t s = base + 0x9E3779B97F4A7C15ULL * (stream + 1);
    auto scramble = [](std::uint64_t z) {
      z ^= z >> 30;
      z *= 0xBF58476D1CE4E5B9ULL;
      z ^= z >> 27;
      z *= 0x94D049BB133111EBULL;
      z ^= z >> 31;
      return z;
    };
    return scramble(scramble(s) + 0x9E3779B97F4A7C15ULL);
  }

 private:
  std::mt19937_64 gen_;
};

}  // namespace mjp
