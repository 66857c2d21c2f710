#pragma once

#include <cstdint>
#include <vector>

namespace lotus {

// Deterministic PRNG used wherever the harness needs randomness (seed-corpus
// sampling, per-epoch shuffles, synthetic data in tests). The algorithm is
// splitmix64 (Steele, Lea & Flood), 64-bit state, chosen because it is tiny
// and trivially portable across implementations. Identifier:
// "splitmix64/fisher-yates/v1" — bump it if either the generator or the
// shuffle below ever changes, because sampled outputs change with it.
class SplitMix64 {
 public:
  explicit constexpr SplitMix64(std::uint64_t seed) noexcept : state_(seed) {}

  constexpr std::uint64_t next() noexcept {
    state_ += 0x9e3779b97f4a7c15ULL;
    std::uint64_t z = state_;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  // Uniform-ish draw in [0, bound) via modulo. The modulo bias is
  // negligible for the corpus sizes involved and keeps the sampler
  // reproducible from the documented algorithm alone.
  constexpr std::uint64_t next_below(std::uint64_t bound) noexcept {
    return next() % bound;
  }

 private:
  std::uint64_t state_;
};

// Fisher-Yates shuffle of [0, n) driven by SplitMix64(seed). Same (n, seed)
// always yields the same permutation.
std::vector<std::size_t> shuffle_indices(std::size_t n, std::uint64_t seed);

}  // namespace lotus
