#pragma once

// Seeded synthetic corpora for classifier and pipeline checks.
//
// Keyword corpus: label k holds exactly when marker token k occurs in the
// text, so the task is linearly separable from surface tokens.
//
// Latent-cue corpus: label k is carried by a cue *substring* embedded in a
// token that is unique to its row (never shared between rows, hence never
// shared between train and test). Token-level features cannot generalize,
// but the stub backend keyword-matches the cue substring and injects a
// stable clause into the explanation, so only the augmented mode can learn
// the mapping.

#include <algorithm>
#include <array>
#include <cstdio>
#include <random>
#include <string>
#include <vector>

#include "lotus/corpus.hpp"
#include "lotus/explainer.hpp"

namespace testsupport {

inline const std::array<std::string, 5>& keyword_markers() {
  static const std::array<std::string, 5> markers = {"grr", "eek", "yay", "sob", "wow"};
  return markers;
}

inline const std::vector<std::string>& filler_words() {
  static const std::vector<std::string> fillers = {
      "the", "on", "a", "it", "day", "was", "and", "quiet",
      "morning", "we", "went", "again", "street", "later"};
  return fillers;
}

inline const lotus::CueMap& latent_cue_map() {
  static const lotus::CueMap cues = {
      {"zang", "mentions a grievance"}, {"zfea", "mentions a threat"},
      {"zjoy", "mentions a delight"},   {"zsad", "mentions a loss"},
      {"zsur", "mentions a twist"},
  };
  return cues;
}

struct SyntheticSplits {
  lotus::Dataset train;
  lotus::Dataset test;
};

namespace detail {

inline lotus::LabeledExample make_row(const std::string& id, std::mt19937_64& rng,
                                      bool latent, std::uint64_t& unique_counter) {
  std::bernoulli_distribution positive(0.4);
  std::uniform_int_distribution<std::size_t> filler_pick(0, filler_words().size() - 1);
  std::uniform_int_distribution<int> filler_count(3, 6);

  lotus::LabeledExample example;
  example.id = id;
  std::vector<std::string> tokens;
  for (std::size_t k = 0; k < 5; ++k) {
    example.labels[k] = positive(rng) ? 1 : 0;
    if (!example.labels[k]) continue;
    if (latent) {
      char suffix[16];
      std::snprintf(suffix, sizeof(suffix), "%08llx",
                    static_cast<unsigned long long>(unique_counter++));
      tokens.push_back(latent_cue_map()[k].first + suffix);
    } else {
      tokens.push_back(keyword_markers()[k]);
    }
  }
  const int fillers = filler_count(rng);
  for (int i = 0; i < fillers; ++i) tokens.push_back(filler_words()[filler_pick(rng)]);
  std::shuffle(tokens.begin(), tokens.end(), rng);

  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (i > 0) example.text += ' ';
    example.text += tokens[i];
  }
  return example;
}

inline SyntheticSplits make_splits(std::size_t train_rows, std::size_t test_rows,
                                   std::uint64_t seed, bool latent) {
  std::mt19937_64 rng(seed);
  std::uint64_t unique_counter = 0;
  SyntheticSplits splits;
  splits.train.split_name = "train";
  splits.test.split_name = "test";
  for (std::size_t i = 0; i < train_rows; ++i) {
    splits.train.examples.push_back(
        make_row("tr" + std::to_string(i), rng, latent, unique_counter));
  }
  for (std::size_t i = 0; i < test_rows; ++i) {
    splits.test.examples.push_back(
        make_row("te" + std::to_string(i), rng, latent, unique_counter));
  }
  return splits;
}

}  // namespace detail

inline SyntheticSplits make_keyword_splits(std::size_t train_rows, std::size_t test_rows,
                                           std::uint64_t seed) {
  return detail::make_splits(train_rows, test_rows, seed, /*latent=*/false);
}

inline SyntheticSplits make_latent_cue_splits(std::size_t train_rows, std::size_t test_rows,
                                              std::uint64_t seed) {
  return detail::make_splits(train_rows, test_rows, seed, /*latent=*/true);
}

}  // namespace testsupport
