#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <unordered_map>
#include <vector>

#include "lotus/classifier.hpp"
#include "lotus/corpus.hpp"
#include "lotus/explainer.hpp"
#include "lotus/metrics.hpp"

#include <json.hpp>

namespace lotus {

enum class Mode { text_only, text_plus_explanation };

std::string to_string(Mode mode);
Mode mode_from_string(const std::string& s);

struct ExperimentConfig {
  Mode mode = Mode::text_only;
  std::string train_path;
  std::string dev_path;  // evaluation split only; unused by run_experiment
  std::string test_path;
  BackendDescriptor backend;
  std::string prompt_version = "v1";
  std::string classifier_backend = "reference";
  TrainConfig train = TrainConfig::reference_defaults();
  std::vector<std::int64_t> run_seeds = {1};
  std::string cache_path;

  void validate() const;
  nlohmann::json to_json() const;
  static ExperimentConfig from_json(const nlohmann::json& j);
  static ExperimentConfig load(const std::filesystem::path& path);
};

struct RunResult {
  std::int64_t seed = 0;
  MetricsReport metrics;  // test split
  std::vector<PredictionRecord> predictions;  // one per test example, in order
};

struct PrfStat {
  MeanStd precision;
  MeanStd recall;
  MeanStd f1;
};

// Mean and sample standard deviation of every scalar metric across runs.
struct RunAggregate {
  std::size_t runs = 0;
  std::vector<std::int64_t> seeds;
  std::array<PrfStat, kNumEmotions> per_label{};
  PrfStat macro;
  PrfStat micro;

  nlohmann::json to_json() const;
};

// text + single space + explanation, byte-faithful, no trimming.
// Throws ArgumentError if either side is empty.
std::string augment_example(const std::string& text, const std::string& explanation);

// Trains in the configured mode with the given seed, predicts on the test
// split and evaluates. In explanation mode every train and test example is
// resolved through the cache/backend before training; a missing explanation
// is a hard error, never a silent fallback to text-only. Deterministic
// given (config, seed, cache contents). `backend` and `cache` may be null
// in text_only mode and are never touched there.
RunResult run_experiment(const ExperimentConfig& config, std::int64_t seed,
                         ExplanationBackend* backend, ExplanationCache* cache);

struct MultiRunOutput {
  RunAggregate aggregate;
  std::vector<RunResult> runs;
};

// One run per seed in config.run_seeds (datasets parsed and explanations
// resolved once, shared across runs). A failing run aborts the whole
// aggregate with the failing seed named in the error.
MultiRunOutput run_multi(const ExperimentConfig& config, ExplanationBackend* backend,
                         ExplanationCache* cache);

// Convenience entry that builds backend and cache from the config.
MultiRunOutput run_multi(const ExperimentConfig& config);

RunAggregate aggregate_runs(const std::vector<RunResult>& runs);

// Artifact writers used by run_multi consumers; all deterministic
// byte-for-byte for identical inputs.
void write_predictions_jsonl(const std::vector<PredictionRecord>& predictions,
                             const std::filesystem::path& path);
std::vector<PredictionRecord> read_predictions_jsonl(const std::filesystem::path& path);
void write_json_file(const nlohmann::json& j, const std::filesystem::path& path);
nlohmann::json read_json_file(const std::filesystem::path& path);

// The augmentation closure used in explanation mode: texts map to cached
// explanations; unknown text raises DataError. Exposed so tests can check
// train/predict symmetry.
TextTransform make_augment_transform(
    std::unordered_map<std::string, std::string> explanation_by_text);

}  // namespace lotus
