#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "lotus/labels.hpp"

#include <json.hpp>

namespace lotus {

// One sentence with its five binary emotion labels.
struct LabeledExample {
  std::string id;
  std::string text;
  EmotionLabelSet labels;

  friend bool operator==(const LabeledExample&, const LabeledExample&) = default;
};

// An ordered split of the corpus. Order is preserved from the source file.
struct Dataset {
  std::string split_name;  // train | dev | test
  std::vector<LabeledExample> examples;

  std::size_t size() const { return examples.size(); }

  friend bool operator==(const Dataset&, const Dataset&) = default;
};

struct DistributionStats {
  std::array<std::uint64_t, kNumEmotions> per_label_positive_count{};
  std::uint64_t total_examples = 0;

  friend bool operator==(const DistributionStats&, const DistributionStats&) = default;
};

inline constexpr std::array<std::string_view, 7> kDatasetHeader = {
    "id", "text", "anger", "fear", "joy", "sadness", "surprise"};

void validate_split_name(const std::string& split_name);

// Parses a dataset CSV. The first record must be exactly
// `id,text,anger,fear,joy,sadness,surprise`. Labels are accepted strictly
// as 0 or 1; ids must be non-empty and unique; text must be non-empty after
// whitespace trimming (the stored text stays byte-exact).
Dataset parse_dataset(const std::filesystem::path& path, const std::string& split_name);

// Same parser over an in-memory document (used by tests and round-trips).
Dataset parse_dataset_text(std::string_view text, const std::string& split_name);

// Serializes a dataset back to CSV (header + one record per example, LF
// line ends). parse_dataset_text(format_dataset(d)) == d.
std::string format_dataset(const Dataset& dataset);

void write_dataset(const Dataset& dataset, const std::filesystem::path& path);

DistributionStats label_distribution(const Dataset& dataset);

// {"split": ..., "total": N, "counts": {"anger": ..., ...}}
nlohmann::json stats_to_json(const Dataset& dataset, const DistributionStats& stats);

// Seeded uniform draw without replacement: Fisher-Yates over the index list
// with SplitMix64(seed), keep the first n, in shuffled order. Same
// (dataset, n, seed) always returns the identical list.
std::vector<LabeledExample> sample_seed_corpus(const Dataset& dataset, std::size_t n,
                                               std::uint64_t seed);

}  // namespace lotus
