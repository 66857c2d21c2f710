#include "lotus/classifier.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <mutex>

#include "lotus/errors.hpp"
#include "lotus/hash.hpp"
#include "lotus/rng.hpp"

namespace lotus {

namespace {

bool is_token_char(unsigned char c) {
  return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9');
}

char to_lower_ascii(unsigned char c) {
  return (c >= 'A' && c <= 'Z') ? static_cast<char>(c - 'A' + 'a')
                                : static_cast<char>(c);
}

void check_finite(const double* values, std::size_t count, const char* what) {
  for (std::size_t i = 0; i < count; ++i) {
    if (!std::isfinite(values[i])) {
      throw ValidationError(std::string("non-finite ") + what +
                            " encountered during training");
    }
  }
}

}  // namespace

TrainConfig TrainConfig::reference_defaults() { return TrainConfig{}; }

TrainConfig TrainConfig::external_profile() {
  TrainConfig config;
  config.batch_size = 8;
  config.learning_rate = 5e-5;
  config.epochs = 3;
  return config;
}

void TrainConfig::validate() const {
  if (feature_dim < 2) throw ValidationError("feature_dim must be >= 2");
  if (ngram_max != 1 && ngram_max != 2) throw ValidationError("ngram_max must be 1 or 2");
  if (batch_size <= 0) throw ValidationError("batch_size must be positive");
  if (!(learning_rate > 0.0)) throw ValidationError("learning_rate must be positive");
  if (epochs <= 0) throw ValidationError("epochs must be positive");
  if (!(threshold >= 0.0 && threshold <= 1.0)) {
    throw ValidationError("threshold must be in [0, 1]");
  }
}

nlohmann::json TrainConfig::to_json() const {
  return nlohmann::json{{"feature_dim", feature_dim}, {"ngram_max", ngram_max},
                        {"batch_size", batch_size},   {"learning_rate", learning_rate},
                        {"epochs", epochs},           {"seed", seed},
                        {"threshold", threshold}};
}

TrainConfig TrainConfig::from_json(const nlohmann::json& j) {
  TrainConfig config;
  config.feature_dim = j.value("feature_dim", config.feature_dim);
  config.ngram_max = j.value("ngram_max", config.ngram_max);
  config.batch_size = j.value("batch_size", config.batch_size);
  config.learning_rate = j.value("learning_rate", config.learning_rate);
  config.epochs = j.value("epochs", config.epochs);
  config.seed = j.value("seed", config.seed);
  config.threshold = j.value("threshold", config.threshold);
  config.validate();
  return config;
}

nlohmann::json PredictionRecord::to_json() const {
  nlohmann::json probs = nlohmann::json::array();
  nlohmann::json flags = nlohmann::json::array();
  for (std::size_t k = 0; k < kNumEmotions; ++k) {
    probs.push_back(probabilities[k]);
    flags.push_back(static_cast<int>(decisions[k]));
  }
  return nlohmann::json{
      {"example_id", example_id}, {"probabilities", probs}, {"decisions", flags}};
}

PredictionRecord PredictionRecord::from_json(const nlohmann::json& j) try {
  PredictionRecord record;
  record.example_id = j.at("example_id").get<std::string>();
  const auto& probs = j.at("probabilities");
  const auto& flags = j.at("decisions");
  if (probs.size() != kNumEmotions || flags.size() != kNumEmotions) {
    throw ValidationError("prediction record must carry 5 probabilities and 5 decisions");
  }
  for (std::size_t k = 0; k < kNumEmotions; ++k) {
    record.probabilities[k] = probs[k].get<double>();
    int flag = flags[k].get<int>();
    validate_flag(flag, "prediction record '" + record.example_id + "'");
    record.decisions[k] = static_cast<std::uint8_t>(flag);
  }
  return record;
} catch (const nlohmann::json::exception& e) {
  throw ValidationError(std::string("prediction record: ") + e.what());
}

std::vector<std::string> tokenize(const std::string& text) {
  std::vector<std::string> tokens;
  std::string current;
  for (unsigned char c : text) {
    if (is_token_char(c)) {
      current.push_back(to_lower_ascii(c));
    } else if (!current.empty()) {
      tokens.push_back(std::move(current));
      current.clear();
    }
  }
  if (!current.empty()) tokens.push_back(std::move(current));
  return tokens;
}

FeatureVector featurize(const std::vector<std::string>& tokens, std::uint32_t feature_dim,
                        int ngram_max) {
  if (feature_dim < 2) throw ArgumentError("feature_dim must be >= 2");
  if (ngram_max != 1 && ngram_max != 2) throw ArgumentError("ngram_max must be 1 or 2");

  std::map<std::uint32_t, double> counts;
  auto add = [&](std::string_view gram) {
    const auto index = static_cast<std::uint32_t>(fnv1a64(gram) % feature_dim);
    counts[index] += 1.0;
  };
  for (const auto& token : tokens) add(token);
  if (ngram_max == 2 && tokens.size() >= 2) {
    std::string bigram;
    for (std::size_t i = 0; i + 1 < tokens.size(); ++i) {
      bigram.assign(tokens[i]);
      bigram.push_back('_');
      bigram.append(tokens[i + 1]);
      add(bigram);
    }
  }

  FeatureVector fv;
  fv.entries.assign(counts.begin(), counts.end());
  return fv;
}

FeatureVector features_for_text(const std::string& text, const TrainConfig& config) {
  auto tokens = tokenize(text);
  if (tokens.size() > kMaxTokensAfterTokenize) {
    tokens.resize(kMaxTokensAfterTokenize);
  }
  return featurize(tokens, config.feature_dim, config.ngram_max);
}

double sigmoid(double z) {
  if (z >= 0.0) {
    return 1.0 / (1.0 + std::exp(-z));
  }
  const double e = std::exp(z);
  return e / (1.0 + e);
}

std::array<double, kNumEmotions> predict_proba(const ModelParams& model,
                                               const FeatureVector& fv) {
  std::array<double, kNumEmotions> probabilities{};
  std::array<double, kNumEmotions> logits = model.bias;
  for (const auto& [index, count] : fv.entries) {
    if (index >= model.feature_dim) {
      throw ArgumentError("feature index " + std::to_string(index) +
                          " out of range for feature_dim " +
                          std::to_string(model.feature_dim));
    }
    const double* w = model.weights.data() +
                      static_cast<std::size_t>(index) * kNumEmotions;
    for (std::size_t k = 0; k < kNumEmotions; ++k) {
      logits[k] += count * w[k];
    }
  }
  for (std::size_t k = 0; k < kNumEmotions; ++k) {
    probabilities[k] = sigmoid(logits[k]);
  }
  return probabilities;
}

BceGradient bce_loss_and_grad(const ModelParams& model, const FeatureVector& fv,
                              const EmotionLabelSet& labels) {
  BceGradient grad;
  grad.probabilities = predict_proba(model, fv);
  for (std::size_t k = 0; k < kNumEmotions; ++k) {
    const double y = labels[k] ? 1.0 : 0.0;
    const double p = std::clamp(grad.probabilities[k], kProbClamp, 1.0 - kProbClamp);
    grad.loss -= y * std::log(p) + (1.0 - y) * std::log(1.0 - p);
    grad.dlogits[k] = grad.probabilities[k] - y;
  }
  return grad;
}

EmotionLabelSet decide(const std::array<double, kNumEmotions>& probabilities,
                       double threshold) {
  if (!(threshold >= 0.0 && threshold <= 1.0)) {
    throw ArgumentError("threshold must be in [0, 1]");
  }
  EmotionLabelSet decisions;
  for (std::size_t k = 0; k < kNumEmotions; ++k) {
    decisions[k] = probabilities[k] >= threshold ? 1 : 0;
  }
  return decisions;
}

TrainResult train(const std::vector<TrainExample>& dataset, const TrainConfig& config,
                  const TextTransform& transform) {
  config.validate();
  if (dataset.empty()) {
    throw ArgumentError("training dataset is empty");
  }

  // Features are fixed across epochs, so transform+featurize once.
  std::vector<FeatureVector> features;
  features.reserve(dataset.size());
  for (const auto& example : dataset) {
    const std::string text = transform ? transform(example.text) : example.text;
    features.push_back(features_for_text(text, config));
  }

  TrainResult result;
  ModelParams& model = result.params;
  model.feature_dim = config.feature_dim;
  model.ngram_max = config.ngram_max;
  model.config = config;
  model.weights.assign(static_cast<std::size_t>(config.feature_dim) * kNumEmotions, 0.0);

  const std::size_t n = dataset.size();
  const auto batch_size = static_cast<std::size_t>(config.batch_size);

  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    const std::uint64_t epoch_seed =
        static_cast<std::uint64_t>(config.seed) ^ static_cast<std::uint64_t>(epoch);
    const auto order = shuffle_indices(n, epoch_seed);

    double epoch_loss = 0.0;
    for (std::size_t start = 0; start < n; start += batch_size) {
      const std::size_t end = std::min(start + batch_size, n);

      // std::map keeps the update order sorted by feature index, which makes
      // parameter bytes independent of anything but (data, config, seed).
      std::map<std::uint32_t, std::array<double, kNumEmotions>> weight_grad;
      std::array<double, kNumEmotions> bias_grad{};

      for (std::size_t b = start; b < end; ++b) {
        const std::size_t idx = order[b];
        const BceGradient g = bce_loss_and_grad(model, features[idx],
                                                dataset[idx].labels);
        epoch_loss += g.loss;
        for (std::size_t k = 0; k < kNumEmotions; ++k) bias_grad[k] += g.dlogits[k];
        for (const auto& [feature, count] : features[idx].entries) {
          auto& slot = weight_grad[feature];
          for (std::size_t k = 0; k < kNumEmotions; ++k) {
            slot[k] += g.dlogits[k] * count;
          }
        }
      }

      const double scale = config.learning_rate / static_cast<double>(end - start);
      for (const auto& [feature, g] : weight_grad) {
        double* w = model.weights.data() + static_cast<std::size_t>(feature) * kNumEmotions;
        for (std::size_t k = 0; k < kNumEmotions; ++k) {
          w[k] -= scale * g[k];
        }
        check_finite(w, kNumEmotions, "weight");
      }
      for (std::size_t k = 0; k < kNumEmotions; ++k) {
        model.bias[k] -= scale * bias_grad[k];
      }
      check_finite(model.bias.data(), kNumEmotions, "bias");
    }
    result.epoch_mean_loss.push_back(epoch_loss / static_cast<double>(n));
  }
  return result;
}

nlohmann::json model_to_json(const ModelParams& model) {
  nlohmann::json rows = nlohmann::json::array();
  for (std::uint32_t i = 0; i < model.feature_dim; ++i) {
    const double* w = model.weights.data() + static_cast<std::size_t>(i) * kNumEmotions;
    bool any = false;
    for (std::size_t k = 0; k < kNumEmotions; ++k) any = any || w[k] != 0.0;
    if (!any) continue;
    nlohmann::json row = nlohmann::json::array();
    row.push_back(i);
    for (std::size_t k = 0; k < kNumEmotions; ++k) row.push_back(w[k]);
    rows.push_back(std::move(row));
  }
  nlohmann::json bias = nlohmann::json::array();
  for (std::size_t k = 0; k < kNumEmotions; ++k) bias.push_back(model.bias[k]);
  return nlohmann::json{{"format", "lotus-model/v1"},
                        {"feature_dim", model.feature_dim},
                        {"ngram_max", model.ngram_max},
                        {"bias", bias},
                        {"weights", rows},
                        {"train_config", model.config.to_json()}};
}

ModelParams model_from_json(const nlohmann::json& j) {
  if (j.value("format", "") != "lotus-model/v1") {
    throw ValidationError("unsupported model format: " + j.value("format", "<missing>"));
  }
  ModelParams model;
  model.feature_dim = j.at("feature_dim").get<std::uint32_t>();
  model.ngram_max = j.at("ngram_max").get<int>();
  model.config = TrainConfig::from_json(j.at("train_config"));
  model.weights.assign(static_cast<std::size_t>(model.feature_dim) * kNumEmotions, 0.0);
  const auto& bias = j.at("bias");
  if (bias.size() != kNumEmotions) throw ValidationError("model bias must have 5 entries");
  for (std::size_t k = 0; k < kNumEmotions; ++k) model.bias[k] = bias[k].get<double>();
  for (const auto& row : j.at("weights")) {
    if (row.size() != kNumEmotions + 1) {
      throw ValidationError("model weight rows must be [index, w0..w4]");
    }
    const auto index = row[0].get<std::uint32_t>();
    if (index >= model.feature_dim) {
      throw ValidationError("model weight index out of range: " + std::to_string(index));
    }
    double* w = model.weights.data() + static_cast<std::size_t>(index) * kNumEmotions;
    for (std::size_t k = 0; k < kNumEmotions; ++k) w[k] = row[k + 1].get<double>();
  }
  return model;
}

void save_model(const ModelParams& model, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open model file for writing: " + path.string());
  out << model_to_json(model).dump(2) << '\n';
  if (!out) throw IoError("failed writing model file: " + path.string());
}

ModelParams load_model(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open model file: " + path.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError("model file is not valid JSON: " + std::string(e.what()));
  }
  return model_from_json(j);
}

const std::string& ReferenceClassifier::name() const {
  static const std::string kName = "reference";
  return kName;
}

void ReferenceClassifier::fit(const std::vector<TrainExample>& dataset,
                              const TrainConfig& config, const TextTransform& transform) {
  result_ = train(dataset, config, transform);
}

std::array<double, kNumEmotions> ReferenceClassifier::predict_proba(
    const std::string& text) const {
  if (result_.params.feature_dim == 0) {
    throw ArgumentError("classifier used before fit()");
  }
  return lotus::predict_proba(result_.params,
                              features_for_text(text, result_.params.config));
}

namespace {

std::mutex g_registry_mutex;
std::map<std::string, ClassifierFactory>& registry() {
  static std::map<std::string, ClassifierFactory> instance;
  return instance;
}

}  // namespace

void register_classifier_backend(const std::string& name, ClassifierFactory factory) {
  std::lock_guard lock(g_registry_mutex);
  registry()[name] = std::move(factory);
}

std::unique_ptr<ClassifierBackend> make_classifier_backend(const std::string& key) {
  if (key == "reference") {
    return std::make_unique<ReferenceClassifier>();
  }
  constexpr std::string_view prefix = "external:";
  if (key.rfind(prefix, 0) == 0) {
    const std::string name = key.substr(prefix.size());
    std::lock_guard lock(g_registry_mutex);
    auto it = registry().find(name);
    if (it != registry().end()) {
      return it->second();
    }
    std::string known = "reference";
    for (const auto& [n, _] : registry()) known += ", external:" + n;
    throw ArgumentError("unknown classifier backend 'external:" + name +
                        "'; registered: " + known);
  }
  throw ArgumentError("classifier backend key must be 'reference' or 'external:<name>', got '" +
                      key + "'");
}

}  // namespace lotus
