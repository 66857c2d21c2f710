#include "lotus/labels.hpp"

namespace lotus {

std::size_t emotion_index(std::string_view name) {
  for (std::size_t k = 0; k < kNumEmotions; ++k) {
    if (kEmotionNames[k] == name) return k;
  }
  throw ArgumentError("unknown emotion label: " + std::string(name));
}

}  // namespace lotus
