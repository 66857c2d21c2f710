#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "lotus/classifier.hpp"
#include "lotus/errors.hpp"
#include "lotus/metrics.hpp"

#include "support/helpers.hpp"
#include "support/oracles.hpp"
#include "support/synthetic.hpp"

using namespace lotus;

namespace {

TrainConfig small_config(std::uint32_t dim = 1u << 12) {
  TrainConfig config;
  config.feature_dim = dim;
  return config;
}

ModelParams random_model(std::mt19937_64& rng, std::uint32_t dim) {
  std::normal_distribution<double> weight(0.0, 0.3);
  ModelParams model;
  model.feature_dim = dim;
  model.config = small_config(dim);
  model.weights.resize(static_cast<std::size_t>(dim) * kNumEmotions);
  for (auto& w : model.weights) w = weight(rng);
  for (auto& b : model.bias) b = weight(rng);
  return model;
}

FeatureVector random_features(std::mt19937_64& rng, std::uint32_t dim) {
  std::uniform_int_distribution<std::uint32_t> index_pick(0, dim - 1);
  std::uniform_int_distribution<int> count_pick(1, 3);
  std::uniform_int_distribution<int> size_pick(1, 8);
  std::map<std::uint32_t, double> entries;
  const int size = size_pick(rng);
  for (int i = 0; i < size; ++i) entries[index_pick(rng)] += count_pick(rng);
  FeatureVector fv;
  fv.entries.assign(entries.begin(), entries.end());
  return fv;
}

}  // namespace

TEST_CASE("tokenize lowercases and splits on non-alphanumeric runs") {
  CHECK(tokenize("Dad on the warpath.") ==
        std::vector<std::string>{"dad", "on", "the", "warpath"});
  CHECK(tokenize("").empty());
  CHECK(tokenize("Re-do RE-DO") == std::vector<std::string>{"re", "do", "re", "do"});
  CHECK(tokenize("  !!  ") == std::vector<std::string>{});
  CHECK(tokenize("a1b2 C3") == std::vector<std::string>{"a1b2", "c3"});
}

TEST_CASE("featurize hashes unigrams with FNV-1a-64") {
  CHECK(featurize({}, 1u << 18, 2).entries.empty());

  const auto fv = featurize({"a"}, 1u << 18, 1);
  REQUIRE(fv.entries.size() == 1);
  const auto expected_index =
      static_cast<std::uint32_t>(testsupport::oracle_fnv1a64("a") % (1u << 18));
  CHECK(fv.entries[0].first == expected_index);
  CHECK(fv.entries[0].second == 1.0);

  const auto doubled = featurize({"a", "a"}, 1u << 18, 1);
  // counts add; the repeated bigram "a_a" appears only with ngram_max=2
  REQUIRE(doubled.entries.size() == 1);
  CHECK(doubled.entries[0].first == expected_index);
  CHECK(doubled.entries[0].second == 2.0);
}

TEST_CASE("featurize adds adjacent bigrams when ngram_max is 2") {
  const auto fv = featurize({"a", "b"}, 1u << 18, 2);
  std::map<std::uint32_t, double> entries(fv.entries.begin(), fv.entries.end());
  const auto a = static_cast<std::uint32_t>(testsupport::oracle_fnv1a64("a") % (1u << 18));
  const auto b = static_cast<std::uint32_t>(testsupport::oracle_fnv1a64("b") % (1u << 18));
  const auto ab = static_cast<std::uint32_t>(testsupport::oracle_fnv1a64("a_b") % (1u << 18));
  CHECK(entries[a] == 1.0);
  CHECK(entries[b] == 1.0);
  CHECK(entries[ab] == 1.0);
}

TEST_CASE("bigrams make featurization order-sensitive") {
  CHECK(featurize({"a", "b"}, 1u << 16, 2) != featurize({"b", "a"}, 1u << 16, 2));
  CHECK(featurize({"a", "b"}, 1u << 16, 1) == featurize({"b", "a"}, 1u << 16, 1));
}

TEST_CASE("unigram featurization is order-invariant") {
  std::mt19937_64 rng(31337);
  const std::vector<std::string> vocabulary = {"one", "two", "three", "four", "five"};
  std::uniform_int_distribution<std::size_t> pick(0, vocabulary.size() - 1);
  for (int iteration = 0; iteration < 50; ++iteration) {
    std::vector<std::string> tokens;
    std::uniform_int_distribution<int> size_pick(0, 12);
    const int size = size_pick(rng);
    for (int i = 0; i < size; ++i) tokens.push_back(vocabulary[pick(rng)]);
    auto shuffled = tokens;
    std::shuffle(shuffled.begin(), shuffled.end(), rng);
    CHECK(featurize(tokens, 1u << 16, 1) == featurize(shuffled, 1u << 16, 1));
  }
}

TEST_CASE("predict_proba at zero parameters is one half everywhere") {
  ModelParams model;
  model.feature_dim = 16;
  model.config = small_config(16);
  model.weights.assign(16 * kNumEmotions, 0.0);

  FeatureVector fv;
  fv.entries = {{3, 2.0}, {7, 1.0}};
  for (double p : predict_proba(model, fv)) CHECK(p == doctest::Approx(0.5));
}

TEST_CASE("sigmoid saturates and matches an independent evaluation") {
  ModelParams model;
  model.feature_dim = 4;
  model.config = small_config(4);
  model.weights.assign(4 * kNumEmotions, 0.0);
  model.bias.fill(40.0);
  FeatureVector empty;
  for (double p : predict_proba(model, empty)) CHECK(p > 1.0 - 1e-9);

  // single feature, count 2, weight 0.5, bias 0 -> sigmoid(1.0)
  ModelParams one;
  one.feature_dim = 4;
  one.config = small_config(4);
  one.weights.assign(4 * kNumEmotions, 0.0);
  one.weights[0 * kNumEmotions + 0] = 0.5;
  FeatureVector fv;
  fv.entries = {{0, 2.0}};
  CHECK(predict_proba(one, fv)[0] == doctest::Approx(0.7310585786300049).epsilon(1e-12));
}

TEST_CASE("bce loss on fixed points") {
  ModelParams model;
  model.feature_dim = 8;
  model.config = small_config(8);
  model.weights.assign(8 * kNumEmotions, 0.0);
  FeatureVector fv;
  fv.entries = {{1, 1.0}};

  EmotionLabelSet all_ones{{1, 1, 1, 1, 1}};
  const auto g = bce_loss_and_grad(model, fv, all_ones);
  CHECK(g.loss == doctest::Approx(5.0 * std::log(2.0)).epsilon(1e-12));

  // saturate towards a perfect fit: loss collapses under the clamp
  model.bias.fill(50.0);
  const auto perfect = bce_loss_and_grad(model, fv, all_ones);
  CHECK(perfect.loss < 1e-9);
}

TEST_CASE("analytic gradients match central finite differences") {
  std::mt19937_64 rng(20240101);
  const std::uint32_t dim = 64;
  const double epsilon = 1e-6;
  int checked = 0;

  for (int iteration = 0; iteration < 100; ++iteration) {
    ModelParams model = random_model(rng, dim);
    const FeatureVector fv = random_features(rng, dim);
    std::array<int, 5> labels_raw{};
    EmotionLabelSet labels;
    std::bernoulli_distribution flag(0.5);
    for (std::size_t k = 0; k < kNumEmotions; ++k) {
      labels_raw[k] = flag(rng) ? 1 : 0;
      labels[k] = static_cast<std::uint8_t>(labels_raw[k]);
    }

    const auto analytic = bce_loss_and_grad(model, fv, labels);
    CHECK(analytic.loss ==
          doctest::Approx(testsupport::oracle_bce_loss(model, fv, labels_raw)).epsilon(1e-9));

    auto relative_error = [](double a, double b) {
      return std::abs(a - b) / std::max({1e-8, std::abs(a) + std::abs(b)});
    };

    for (const auto& [index, count] : fv.entries) {
      for (std::size_t k = 0; k < kNumEmotions; ++k) {
        const std::size_t flat = static_cast<std::size_t>(index) * kNumEmotions + k;
        const double saved = model.weights[flat];
        model.weights[flat] = saved + epsilon;
        const double up = testsupport::oracle_bce_loss(model, fv, labels_raw);
        model.weights[flat] = saved - epsilon;
        const double down = testsupport::oracle_bce_loss(model, fv, labels_raw);
        model.weights[flat] = saved;
        const double fd = (up - down) / (2.0 * epsilon);
        const double expected = analytic.dlogits[k] * count;
        CHECK(relative_error(expected, fd) <= 1e-4);
        ++checked;
      }
    }
    for (std::size_t k = 0; k < kNumEmotions; ++k) {
      const double saved = model.bias[k];
      model.bias[k] = saved + epsilon;
      const double up = testsupport::oracle_bce_loss(model, fv, labels_raw);
      model.bias[k] = saved - epsilon;
      const double down = testsupport::oracle_bce_loss(model, fv, labels_raw);
      model.bias[k] = saved;
      const double fd = (up - down) / (2.0 * epsilon);
      CHECK(relative_error(analytic.dlogits[k], fd) <= 1e-4);
      ++checked;
    }
  }
  CHECK(checked > 1000);
}

TEST_CASE("decide applies the inclusive threshold") {
  const std::array<double, 5> probabilities = {0.6, 0.4, 0.5, 0.1, 0.9};
  CHECK(decide(probabilities, 0.5) == EmotionLabelSet{{1, 0, 1, 0, 1}});
  CHECK(decide(probabilities, 0.0) == EmotionLabelSet{{1, 1, 1, 1, 1}});
  CHECK(decide(probabilities, 1.0) == EmotionLabelSet{{0, 0, 0, 0, 0}});
  CHECK_THROWS_AS(decide(probabilities, 1.5), ArgumentError);
}

TEST_CASE("probabilities stay within [0,1] and inside (0,1) off saturation") {
  std::mt19937_64 rng(555);
  for (int iteration = 0; iteration < 100; ++iteration) {
    const ModelParams model = random_model(rng, 64);
    const FeatureVector fv = random_features(rng, 64);
    for (double p : predict_proba(model, fv)) {
      CHECK(p >= 0.0);
      CHECK(p <= 1.0);
      // |logits| stay small for these draws, so saturation cannot occur
      CHECK(p > 0.0);
      CHECK(p < 1.0);
    }
  }
}

TEST_CASE("decisions stay consistent with the threshold on random vectors") {
  std::mt19937_64 rng(77);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (int iteration = 0; iteration < 200; ++iteration) {
    std::array<double, 5> probabilities{};
    for (auto& p : probabilities) p = unit(rng);
    const double threshold = unit(rng);
    const auto decisions = decide(probabilities, threshold);
    for (std::size_t k = 0; k < kNumEmotions; ++k) {
      CHECK(decisions[k] == (probabilities[k] >= threshold ? 1 : 0));
    }
  }
}

TEST_CASE("training memorizes a single example with decreasing loss") {
  std::vector<TrainExample> data = {{"grr the quiet morning", EmotionLabelSet{{1, 0, 0, 1, 0}}}};
  TrainConfig config = small_config();
  config.epochs = 200;
  config.learning_rate = 0.5;
  config.batch_size = 1;

  const auto result = train(data, config);
  REQUIRE(result.epoch_mean_loss.size() == 200);
  for (std::size_t e = 1; e < result.epoch_mean_loss.size(); ++e) {
    if (result.epoch_mean_loss[e - 1] < 0.01) break;
    CHECK(result.epoch_mean_loss[e] < result.epoch_mean_loss[e - 1]);
  }
  CHECK(result.epoch_mean_loss.back() < 0.01);
}

TEST_CASE("training is bit-deterministic for identical config and seed") {
  const auto splits = testsupport::make_keyword_splits(60, 0, 5);
  std::vector<TrainExample> data;
  for (const auto& example : splits.train.examples) {
    data.push_back({example.text, example.labels});
  }
  TrainConfig config = small_config();
  config.epochs = 3;
  config.seed = 99;

  const auto a = train(data, config);
  const auto b = train(data, config);
  CHECK(a.params.weights == b.params.weights);
  CHECK(a.params.bias == b.params.bias);
  CHECK(a.epoch_mean_loss == b.epoch_mean_loss);

  TrainConfig other = config;
  other.seed = 100;
  const auto c = train(data, other);
  CHECK(a.params.weights != c.params.weights);
}

TEST_CASE("training rejects an empty dataset") {
  CHECK_THROWS_AS(train({}, small_config()), ArgumentError);
}

TEST_CASE("separable keyword corpus reaches high held-out macro F1") {
  const auto splits = testsupport::make_keyword_splits(300, 120, 42);
  std::vector<TrainExample> data;
  for (const auto& example : splits.train.examples) {
    data.push_back({example.text, example.labels});
  }
  TrainConfig config;
  config.epochs = 20;
  config.seed = 1;

  const auto result = train(data, config);
  std::vector<EmotionLabelSet> gold;
  std::vector<EmotionLabelSet> pred;
  for (const auto& example : splits.test.examples) {
    gold.push_back(example.labels);
    pred.push_back(decide(predict_proba(result.params,
                                        features_for_text(example.text, config)),
                          config.threshold));
  }
  const auto report = evaluate(gold, pred);
  CHECK(report.macro.f1 >= 0.95);
}

TEST_CASE("model round-trips through JSON bit-exact") {
  const auto splits = testsupport::make_keyword_splits(40, 0, 3);
  std::vector<TrainExample> data;
  for (const auto& example : splits.train.examples) {
    data.push_back({example.text, example.labels});
  }
  TrainConfig config = small_config();
  config.epochs = 2;
  const auto result = train(data, config);

  testsupport::TempDir dir("model");
  const auto path = dir.path / "model.json";
  save_model(result.params, path);
  const auto loaded = load_model(path);
  CHECK(loaded.feature_dim == result.params.feature_dim);
  CHECK(loaded.ngram_max == result.params.ngram_max);
  CHECK(loaded.weights == result.params.weights);
  CHECK(loaded.bias == result.params.bias);
  CHECK(loaded.config == result.params.config);
}

TEST_CASE("train config validation and profiles") {
  CHECK(TrainConfig::external_profile().learning_rate == doctest::Approx(5e-5));
  CHECK(TrainConfig::external_profile().batch_size == 8);
  CHECK(TrainConfig::external_profile().epochs == 3);
  CHECK(TrainConfig::reference_defaults().learning_rate == doctest::Approx(0.1));
  CHECK(TrainConfig::reference_defaults().feature_dim == (1u << 18));

  TrainConfig bad;
  bad.threshold = 1.5;
  CHECK_THROWS_AS(bad.validate(), ValidationError);
  bad = TrainConfig{};
  bad.ngram_max = 3;
  CHECK_THROWS_AS(bad.validate(), ValidationError);
  bad = TrainConfig{};
  bad.epochs = 0;
  CHECK_THROWS_AS(bad.validate(), ValidationError);
}

TEST_CASE("long inputs are truncated to the token cap") {
  std::string text;
  for (int i = 0; i < 600; ++i) text += "tok" + std::to_string(i) + " ";
  TrainConfig config = small_config();
  config.ngram_max = 1;
  const auto fv = features_for_text(text, config);
  double total = 0.0;
  for (const auto& [_, count] : fv.entries) total += count;
  CHECK(total == doctest::Approx(512.0));
}

TEST_CASE("classifier backend registry dispatches reference and externals") {
  auto reference = make_classifier_backend("reference");
  CHECK(reference->name() == "reference");

  CHECK_THROWS_AS(make_classifier_backend("external:missing"), ArgumentError);
  CHECK_THROWS_AS(make_classifier_backend("bogus"), ArgumentError);

  struct ConstantBackend final : ClassifierBackend {
    const std::string& name() const override {
      static const std::string kName = "constant";
      return kName;
    }
    void fit(const std::vector<TrainExample>&, const TrainConfig&,
             const TextTransform&) override {}
    std::array<double, kNumEmotions> predict_proba(const std::string&) const override {
      return {0.9, 0.1, 0.9, 0.1, 0.9};
    }
  };
  register_classifier_backend("constant", [] { return std::make_unique<ConstantBackend>(); });
  auto external = make_classifier_backend("external:constant");
  external->fit({}, TrainConfig{}, {});
  CHECK(external->predict_proba("anything")[0] == doctest::Approx(0.9));
}

TEST_CASE("reference classifier adapter honors the transform") {
  std::vector<TrainExample> data = {{"alpha", EmotionLabelSet{{1, 0, 0, 0, 0}}},
                                    {"beta", EmotionLabelSet{{0, 0, 1, 0, 0}}}};
  TrainConfig config = small_config();
  config.epochs = 30;
  config.batch_size = 1;

  auto transform = [](const std::string& text) { return text + " marker"; };
  ReferenceClassifier classifier;
  classifier.fit(data, config, transform);
  // predicting the transformed string reproduces the training-time view
  const auto with = classifier.predict_proba("alpha marker");
  CHECK(with[0] > 0.5);
}
