#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "lotus/labels.hpp"

#include <json.hpp>

namespace lotus {

// Hyperparameters of the reference classifier. `external_profile()` carries
// the defaults used when training is delegated to an external transformer
// backend (batch 8, lr 5e-5, 3 epochs); `reference_defaults()` is tuned for
// the built-in hashed n-gram model.
struct TrainConfig {
  std::uint32_t feature_dim = 1u << 18;
  int ngram_max = 2;  // 1 or 2
  int batch_size = 8;
  double learning_rate = 0.1;
  int epochs = 3;
  std::int64_t seed = 1;
  double threshold = 0.5;

  static TrainConfig reference_defaults();
  static TrainConfig external_profile();

  void validate() const;
  nlohmann::json to_json() const;
  static TrainConfig from_json(const nlohmann::json& j);

  friend bool operator==(const TrainConfig&, const TrainConfig&) = default;
};

// Sparse hashed feature counts, sorted by index. Indices are in
// [0, feature_dim); counts are >= 1.
struct FeatureVector {
  std::vector<std::pair<std::uint32_t, double>> entries;

  friend bool operator==(const FeatureVector&, const FeatureVector&) = default;
};

// Weight matrix (feature_dim x 5, stored row-major per feature index) plus
// one bias per label head. All values stay finite through training.
struct ModelParams {
  std::uint32_t feature_dim = 0;
  int ngram_max = 2;
  std::vector<double> weights;  // feature_dim * kNumEmotions
  std::array<double, kNumEmotions> bias{};
  TrainConfig config;  // the configuration the model was trained with

  double weight(std::uint32_t feature, std::size_t label) const {
    return weights[static_cast<std::size_t>(feature) * kNumEmotions + label];
  }
};

struct PredictionRecord {
  std::string example_id;
  std::array<double, kNumEmotions> probabilities{};
  EmotionLabelSet decisions;

  nlohmann::json to_json() const;
  static PredictionRecord from_json(const nlohmann::json& j);
};

// Lowercases ASCII letters and splits on every maximal run of
// non-alphanumeric bytes. Token characters are ASCII [a-z0-9]; any other
// byte (including non-ASCII UTF-8 bytes) separates tokens. Deterministic
// and locale-independent.
std::vector<std::string> tokenize(const std::string& text);

// Augmented inputs are capped at this many tokens after tokenization,
// keeping the prefix; original text precedes the explanation, so it is
// never dropped first.
inline constexpr std::size_t kMaxTokensAfterTokenize = 512;

// Hashes each unigram, and each adjacent bigram joined with '_' when
// ngram_max == 2, with FNV-1a-64 modulo feature_dim; counts accumulate.
FeatureVector featurize(const std::vector<std::string>& tokens, std::uint32_t feature_dim,
                        int ngram_max);

// tokenize + truncate to kMaxTokensAfterTokenize + featurize.
FeatureVector features_for_text(const std::string& text, const TrainConfig& config);

// Numerically stable logistic function.
double sigmoid(double z);

// p_k = sigmoid(bias_k + sum_i fv_i * W_{i,k}) for the five heads.
std::array<double, kNumEmotions> predict_proba(const ModelParams& model,
                                               const FeatureVector& fv);

struct BceGradient {
  double loss = 0.0;
  // d loss / d logit_k = p_k - y_k; weight and bias gradients follow as
  // grad_weights[i][k] = dlogits[k] * fv_i and grad_bias[k] = dlogits[k].
  std::array<double, kNumEmotions> dlogits{};
  std::array<double, kNumEmotions> probabilities{};
};

inline constexpr double kProbClamp = 1e-12;

// Summed binary cross-entropy over the five heads with probabilities
// clamped to [1e-12, 1 - 1e-12].
BceGradient bce_loss_and_grad(const ModelParams& model, const FeatureVector& fv,
                              const EmotionLabelSet& labels);

EmotionLabelSet decide(const std::array<double, kNumEmotions>& probabilities,
                       double threshold);

struct TrainExample {
  std::string text;
  EmotionLabelSet labels;
};

// Applied to raw text before tokenization; an empty function means
// identity. The explanation mode passes the augmentation closure here so
// training and prediction see exactly the same transformed strings.
using TextTransform = std::function<std::string(const std::string&)>;

struct TrainResult {
  ModelParams params;
  std::vector<double> epoch_mean_loss;  // one entry per epoch
};

// Mini-batch gradient descent (plain SGD, batch-mean gradients). Epoch e
// shuffles with seed ^ e (e starting at 0) via the repo PRNG, so identical
// inputs and seed give bit-identical parameters. Throws ArgumentError on an
// empty dataset.
TrainResult train(const std::vector<TrainExample>& dataset, const TrainConfig& config,
                  const TextTransform& transform = {});

// Versioned JSON persistence of the non-zero weight rows; round-trips
// exactly (bit-identical doubles).
void save_model(const ModelParams& model, const std::filesystem::path& path);
ModelParams load_model(const std::filesystem::path& path);
nlohmann::json model_to_json(const ModelParams& model);
ModelParams model_from_json(const nlohmann::json& j);

// Adapter contract for classifier backends. The reference model implements
// it; external transformer backends plug in through the same surface and
// are selected by the config key `classifier_backend = reference |
// external:<name>`.
class ClassifierBackend {
 public:
  virtual ~ClassifierBackend() = default;

  virtual const std::string& name() const = 0;

  // `transform` must be applied to every training text before
  // featurization, mirroring train().
  virtual void fit(const std::vector<TrainExample>& dataset, const TrainConfig& config,
                   const TextTransform& transform) = 0;

  // `text` is already transformed; callers guarantee it matches what fit saw.
  virtual std::array<double, kNumEmotions> predict_proba(const std::string& text) const = 0;
};

class ReferenceClassifier final : public ClassifierBackend {
 public:
  const std::string& name() const override;
  void fit(const std::vector<TrainExample>& dataset, const TrainConfig& config,
           const TextTransform& transform) override;
  std::array<double, kNumEmotions> predict_proba(const std::string& text) const override;

  const TrainResult& result() const { return result_; }

 private:
  TrainResult result_;
};

using ClassifierFactory = std::function<std::unique_ptr<ClassifierBackend>()>;

// Registers a factory under `external:<name>`; overwrites any previous
// registration with the same name.
void register_classifier_backend(const std::string& name, ClassifierFactory factory);

// key = "reference" or "external:<name>". Throws ArgumentError for unknown
// keys, listing what is registered.
std::unique_ptr<ClassifierBackend> make_classifier_backend(const std::string& key);

}  // namespace lotus
