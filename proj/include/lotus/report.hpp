#pragma once

#include <map>
#include <span>
#include <string>
#include <vector>

#include "lotus/corpus.hpp"
#include "lotus/pipeline.hpp"

namespace lotus {

enum class TableFormat { markdown, csv };

// "mean ± std" with both numbers rounded to 4 decimals, round-half-even.
std::string format_mean_std(const MeanStd& value);
std::string format_fixed4(double value);

struct MethodAggregate {
  std::string name;
  RunAggregate aggregate;
};

// One row per method, columns Macro P/R/F1 and Micro P/R/F1 as
// "mean ± std". Column-wise maxima (by mean, ties all marked) are bolded in
// markdown and suffixed with '*' in CSV.
std::string overall_table(std::span<const MethodAggregate> results, TableFormat format);

struct MethodPerLabel {
  std::string name;
  std::map<std::string, Prf> per_label;  // keyed by canonical emotion name
};

// One row per emotion in canonical order, P/R/F1 per method; row-wise
// maxima per metric marked as above. A method missing any canonical label
// raises ConsistencyError.
std::string per_emotion_table(std::span<const MethodPerLabel> results, TableFormat format);

enum class ErrorKind { false_positive, false_negative };

struct ErrorEntry {
  std::string example_id;
  std::string text;
  std::string explanation;  // empty when not available
  std::array<double, kNumEmotions> probabilities{};
};

struct ErrorBucket {
  std::string label;
  ErrorKind kind = ErrorKind::false_positive;
  std::vector<ErrorEntry> entries;
};

// For each label: FP bucket (decision 1, gold 0) and FN bucket (decision 0,
// gold 1), entries sorted by |probability - threshold| descending, ties
// broken by dataset order. Predictions must cover exactly the dataset ids;
// anything unmatched raises ConsistencyError. Returns the ten buckets in
// canonical label order, FP before FN.
std::vector<ErrorBucket> error_analysis(
    const Dataset& dataset, std::span<const PredictionRecord> predictions,
    const std::map<std::string, std::string>* explanation_by_id, double threshold);

// errors_<label>.md content for one label's FP and FN buckets.
std::string render_error_report(const ErrorBucket& false_positives,
                                const ErrorBucket& false_negatives, double threshold);

}  // namespace lotus
