#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <string>
#include <string_view>

#include "lotus/errors.hpp"

namespace lotus {

inline constexpr std::size_t kNumEmotions = 5;

// Canonical label order, fixed everywhere in the system: files, vectors,
// reports and model heads all use this order.
inline constexpr std::array<std::string_view, kNumEmotions> kEmotionNames = {
    "anger", "fear", "joy", "sadness", "surprise"};

// Five binary flags in canonical order.
struct EmotionLabelSet {
  std::array<std::uint8_t, kNumEmotions> flags{};

  constexpr std::uint8_t operator[](std::size_t k) const { return flags[k]; }
  constexpr std::uint8_t& operator[](std::size_t k) { return flags[k]; }

  friend bool operator==(const EmotionLabelSet&, const EmotionLabelSet&) = default;
};

inline void validate_flag(int value, const std::string& context) {
  if (value != 0 && value != 1) {
    throw ValidationError(context + ": label value must be 0 or 1, got " +
                          std::to_string(value));
  }
}

// Index of an emotion name in the canonical order; throws ArgumentError for
// unknown names.
std::size_t emotion_index(std::string_view name);

}  // namespace lotus
