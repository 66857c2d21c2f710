#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <vector>

#include "lotus/labels.hpp"

#include <json.hpp>

namespace lotus {

struct LabelCounts {
  std::uint64_t tp = 0;
  std::uint64_t fp = 0;
  std::uint64_t fn = 0;
  std::uint64_t tn = 0;

  friend bool operator==(const LabelCounts&, const LabelCounts&) = default;
};

// Per-label binary confusion counts. For every label,
// tp + fp + fn + tn equals the number of evaluated examples.
struct ConfusionCounts {
  std::array<LabelCounts, kNumEmotions> per_label{};

  friend bool operator==(const ConfusionCounts&, const ConfusionCounts&) = default;
};

struct Prf {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;

  friend bool operator==(const Prf&, const Prf&) = default;
};

struct MacroMicro {
  Prf macro;
  Prf micro;
};

struct MetricsReport {
  std::array<Prf, kNumEmotions> per_label{};
  Prf macro;
  Prf micro;
  ConfusionCounts counts;

  nlohmann::json to_json() const;
};

// Positionally aligned gold/pred lists. Throws ArgumentError on length
// mismatch.
ConfusionCounts confusion(std::span<const EmotionLabelSet> gold,
                          std::span<const EmotionLabelSet> pred);

// P = tp/(tp+fp), R = tp/(tp+fn), F1 = 2PR/(P+R). Any 0/0 denominator
// yields 0 — the zero-division rule. It applies per quantity, so e.g. a
// label with no predictions and no gold positives scores (0, 0, 0).
Prf prf(std::uint64_t tp, std::uint64_t fp, std::uint64_t fn);

// Macro: unweighted mean of the five per-label P/R/F1 values (zero-division
// rule applied per label first). Micro: prf over pooled tp/fp/fn.
MacroMicro macro_micro(const ConfusionCounts& counts);

MetricsReport evaluate(std::span<const EmotionLabelSet> gold,
                       std::span<const EmotionLabelSet> pred);

struct MeanStd {
  double mean = 0.0;
  double std = 0.0;  // sample standard deviation, 0 when n < 2
};

// mean = sum/n; std = sqrt(sum((x-mean)^2)/(n-1)) for n >= 2, else 0.
// Throws ArgumentError on an empty list.
MeanStd aggregate(std::span<const double> values);

}  // namespace lotus
