#pragma once

#include <cstdint>
#include <string>
#include <string_view>

namespace lotus {

// FNV-1a, 64-bit. This is the single hash used across the project: feature
// hashing in the classifier and cache keys in the explainer. Constants are
// the published ones (offset basis 14695981039346656037, prime
// 1099511628211).
inline constexpr std::uint64_t kFnvOffsetBasis = 0xcbf29ce484222325ULL;
inline constexpr std::uint64_t kFnvPrime = 0x100000001b3ULL;

constexpr std::uint64_t fnv1a64(std::string_view bytes) noexcept {
  std::uint64_t h = kFnvOffsetBasis;
  for (unsigned char c : bytes) {
    h ^= static_cast<std::uint64_t>(c);
    h *= kFnvPrime;
  }
  return h;
}

// 16 lowercase hex characters, zero-padded.
std::string to_hex16(std::uint64_t value);

}  // namespace lotus
