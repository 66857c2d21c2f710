#include "lotus/rng.hpp"

#include <numeric>

namespace lotus {

std::vector<std::size_t> shuffle_indices(std::size_t n, std::uint64_t seed) {
  std::vector<std::size_t> indices(n);
  std::iota(indices.begin(), indices.end(), std::size_t{0});
  SplitMix64 rng(seed);
  for (std::size_t i = n; i > 1; --i) {
    std::size_t j = static_cast<std::size_t>(rng.next_below(i));
    std::swap(indices[i - 1], indices[j]);
  }
  return indices;
}

}  // namespace lotus
