#pragma once

#include <cstdint>
#include <string>
#include <string_view>

namespace temple {

inline constexpr std::uint64_t kFnvOffset = 14695981039346656037ull;
inline constexpr std::uint64_t kFnvPrime = 1099511628211ull;

// 64-bit FNV-1a over raw bytes. Pass a previous hash to chain buffers.
inline std::uint64_t fnv1a64(std::string_view bytes, std::uint64_t h = kFnvOffset) {
  for (unsigned char c : bytes) {
    h ^= static_cast<std::uint64_t>(c);
    h *= kFnvPrime;
  }
  return h;
}

std::uint64_t fnv1a64_file(const std::string& path);

// SplitMix64: a fixed 64-bit mix generator over an additive counter. The
// stream depends only on the seed, so results are stable across platforms
// and standard-library versions.
class SplitMix64 {
 public:
  explicit SplitMix64(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next() {
    std::uint64_t z = (state_ += 0x9E3779B97F4A7C15ull);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
  }

  // Unbiased uniform draw in [0, n). Rejection on the low remainder band.
  std::uint64_t below(std::uint64_t n) {
    const std::uint64_t threshold = (0 - n) % n;
    for (;;) {
      std::uint64_t x = next();
      if (x >= threshold) return x % n;
    }
  }

  // Uniform double in [0, 1) with 53 random bits.
  double unit() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

  // Child generator with an independent stream.
  SplitMix64 split() { return SplitMix64(next()); }

 private:
  std::uint64_t state_;
};

// Seed derivation for every random decision in the pipeline: a 64-bit
// FNV-1a hash of `global_seed 0x1F video_id 0x1F kind 0x1F r` with the
// integers rendered as decimal text.
std::uint64_t derive_seed(std::uint64_t global_seed, std::string_view video_id,
                          std::string_view kind, int r);

inline SplitMix64 derive_rng(std::uint64_t global_seed, std::string_view video_id,
                             std::string_view kind, int r) {
  return SplitMix64(derive_seed(global_seed, video_id, kind, r));
}

}  // namespace temple
