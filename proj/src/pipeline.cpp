#include "lotus/pipeline.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <unordered_map>

#include "lotus/errors.hpp"

namespace lotus {

namespace {

// Rethrows a lotus error with a stage prefix while preserving its type, so
// exit-code mapping and retry decisions still work downstream.
template <typename Fn>
auto with_stage(const std::string& stage, Fn&& fn) -> decltype(fn()) {
  auto prefix = [&](const std::exception& e) { return "[" + stage + "] " + e.what(); };
  try {
    return fn();
  } catch (const BackendError& e) {
    throw BackendError(prefix(e), e.example_id());
  } catch (const ArgumentError& e) {
    throw ArgumentError(prefix(e));
  } catch (const SchemaError& e) {
    throw SchemaError(prefix(e));
  } catch (const ValidationError& e) {
    throw ValidationError(prefix(e));
  } catch (const DataError& e) {
    throw DataError(prefix(e));
  } catch (const ConsistencyError& e) {
    throw ConsistencyError(prefix(e));
  } catch (const ContentError& e) {
    throw ContentError(prefix(e));
  } catch (const IoError& e) {
    throw IoError(prefix(e));
  }
}

std::string snippet(const std::string& text) {
  constexpr std::size_t kMax = 60;
  if (text.size() <= kMax) return text;
  return text.substr(0, kMax) + "...";
}

struct PreparedExperiment {
  Dataset train;
  Dataset test;
  TextTransform transform;  // empty in text_only mode
};

PreparedExperiment prepare(const ExperimentConfig& config, ExplanationBackend* backend,
                           ExplanationCache* cache) {
  config.validate();

  PreparedExperiment prepared;
  prepared.train = with_stage("parse train split",
                              [&] { return parse_dataset(config.train_path, "train"); });
  prepared.test = with_stage("parse test split",
                             [&] { return parse_dataset(config.test_path, "test"); });

  if (config.mode == Mode::text_plus_explanation) {
    if (backend == nullptr || cache == nullptr) {
      throw ArgumentError(
          "text_plus_explanation mode needs an explanation backend and cache");
    }
    const PromptTemplate& prompt = PromptTemplate::for_version(config.prompt_version);

    std::vector<LabeledExample> all;
    all.reserve(prepared.train.size() + prepared.test.size());
    all.insert(all.end(), prepared.train.examples.begin(), prepared.train.examples.end());
    all.insert(all.end(), prepared.test.examples.begin(), prepared.test.examples.end());

    const auto explanations = with_stage("generate explanations", [&] {
      return generate_for_dataset(*backend, prompt, all, *cache,
                                  config.backend.max_parallel);
    });

    std::unordered_map<std::string, std::string> by_text;
    by_text.reserve(all.size());
    for (std::size_t i = 0; i < all.size(); ++i) {
      if (explanations[i].text.empty()) {
        throw DataError("[generate explanations] empty explanation for example '" +
                        all[i].id + "'");
      }
      by_text[all[i].text] = explanations[i].text;
    }
    prepared.transform = make_augment_transform(std::move(by_text));
  }
  return prepared;
}

RunResult run_one(const PreparedExperiment& prepared, const ExperimentConfig& config,
                  std::int64_t seed) {
  std::vector<TrainExample> train_examples;
  train_examples.reserve(prepared.train.size());
  for (const auto& example : prepared.train.examples) {
    train_examples.push_back({example.text, example.labels});
  }

  TrainConfig train_config = config.train;
  train_config.seed = seed;

  auto classifier = make_classifier_backend(config.classifier_backend);
  with_stage("train", [&] {
    classifier->fit(train_examples, train_config, prepared.transform);
    return 0;
  });

  RunResult result;
  result.seed = seed;
  result.predictions.reserve(prepared.test.size());
  std::vector<EmotionLabelSet> gold;
  std::vector<EmotionLabelSet> pred;
  gold.reserve(prepared.test.size());
  pred.reserve(prepared.test.size());

  with_stage("predict", [&] {
    for (const auto& example : prepared.test.examples) {
      const std::string text =
          prepared.transform ? prepared.transform(example.text) : example.text;
      PredictionRecord record;
      record.example_id = example.id;
      record.probabilities = classifier->predict_proba(text);
      record.decisions = decide(record.probabilities, train_config.threshold);
      gold.push_back(example.labels);
      pred.push_back(record.decisions);
      result.predictions.push_back(std::move(record));
    }
    return 0;
  });

  result.metrics = evaluate(gold, pred);
  return result;
}

nlohmann::json mean_std_json(const MeanStd& value) {
  return nlohmann::json{{"mean", value.mean}, {"std", value.std}};
}

nlohmann::json prf_stat_json(const PrfStat& stat) {
  return nlohmann::json{{"precision", mean_std_json(stat.precision)},
                        {"recall", mean_std_json(stat.recall)},
                        {"f1", mean_std_json(stat.f1)}};
}

}  // namespace

std::string to_string(Mode mode) {
  switch (mode) {
    case Mode::text_only: return "text_only";
    case Mode::text_plus_explanation: return "text_plus_explanation";
  }
  throw ArgumentError("invalid mode");
}

Mode mode_from_string(const std::string& s) {
  if (s == "text_only") return Mode::text_only;
  if (s == "text_plus_explanation") return Mode::text_plus_explanation;
  throw ValidationError("mode must be text_only or text_plus_explanation, got '" + s +
                        "'");
}

void ExperimentConfig::validate() const {
  if (run_seeds.empty()) {
    throw ValidationError("run_seeds must be non-empty");
  }
  std::set<std::int64_t> distinct(run_seeds.begin(), run_seeds.end());
  if (distinct.size() != run_seeds.size()) {
    throw ValidationError("run_seeds must be distinct");
  }
  train.validate();
  backend.validate();
  PromptTemplate::for_version(prompt_version);
  if (classifier_backend.empty()) {
    throw ValidationError("classifier_backend must be non-empty");
  }
}

nlohmann::json ExperimentConfig::to_json() const {
  nlohmann::json seeds = nlohmann::json::array();
  for (auto seed : run_seeds) seeds.push_back(seed);
  return nlohmann::json{{"mode", to_string(mode)},
                        {"train_path", train_path},
                        {"dev_path", dev_path},
                        {"test_path", test_path},
                        {"backend", backend.to_json()},
                        {"prompt_version", prompt_version},
                        {"classifier", nlohmann::json{{"backend", classifier_backend}}},
                        {"train", train.to_json()},
                        {"run_seeds", seeds},
                        {"cache_path", cache_path}};
}

ExperimentConfig ExperimentConfig::from_json(const nlohmann::json& j) try {
  ExperimentConfig config;
  if (j.contains("mode")) config.mode = mode_from_string(j.at("mode").get<std::string>());
  config.train_path = j.value("train_path", config.train_path);
  config.dev_path = j.value("dev_path", config.dev_path);
  config.test_path = j.value("test_path", config.test_path);
  if (j.contains("backend")) config.backend = BackendDescriptor::from_json(j.at("backend"));
  config.prompt_version = j.value("prompt_version", config.prompt_version);
  if (j.contains("classifier") && j.at("classifier").contains("backend")) {
    config.classifier_backend = j.at("classifier").at("backend").get<std::string>();
  } else {
    // flat alias accepted on input
    config.classifier_backend = j.value("classifier_backend", config.classifier_backend);
  }
  if (j.contains("train")) config.train = TrainConfig::from_json(j.at("train"));
  if (j.contains("run_seeds")) {
    config.run_seeds.clear();
    for (const auto& seed : j.at("run_seeds")) {
      config.run_seeds.push_back(seed.get<std::int64_t>());
    }
  }
  config.cache_path = j.value("cache_path", config.cache_path);
  config.validate();
  return config;
} catch (const nlohmann::json::exception& e) {
  throw ValidationError(std::string("experiment config: ") + e.what());
}

ExperimentConfig ExperimentConfig::load(const std::filesystem::path& path) {
  return ExperimentConfig::from_json(read_json_file(path));
}

std::string augment_example(const std::string& text, const std::string& explanation) {
  if (text.empty()) throw ArgumentError("augment_example: text is empty");
  if (explanation.empty()) throw ArgumentError("augment_example: explanation is empty");
  std::string out;
  out.reserve(text.size() + 1 + explanation.size());
  out += text;
  out.push_back(' ');
  out += explanation;
  return out;
}

TextTransform make_augment_transform(
    std::unordered_map<std::string, std::string> explanation_by_text) {
  return [map = std::move(explanation_by_text)](const std::string& text) {
    auto it = map.find(text);
    if (it == map.end()) {
      throw DataError("no explanation resolved for text \"" + snippet(text) + "\"");
    }
    return augment_example(text, it->second);
  };
}

RunResult run_experiment(const ExperimentConfig& config, std::int64_t seed,
                         ExplanationBackend* backend, ExplanationCache* cache) {
  const PreparedExperiment prepared = prepare(config, backend, cache);
  return run_one(prepared, config, seed);
}

MultiRunOutput run_multi(const ExperimentConfig& config, ExplanationBackend* backend,
                         ExplanationCache* cache) {
  const PreparedExperiment prepared = prepare(config, backend, cache);

  MultiRunOutput output;
  output.runs.reserve(config.run_seeds.size());
  for (const auto seed : config.run_seeds) {
    output.runs.push_back(with_stage("run seed=" + std::to_string(seed),
                                     [&] { return run_one(prepared, config, seed); }));
  }
  output.aggregate = aggregate_runs(output.runs);
  return output;
}

MultiRunOutput run_multi(const ExperimentConfig& config) {
  config.validate();
  if (config.mode == Mode::text_only) {
    return run_multi(config, nullptr, nullptr);
  }
  auto backend = make_backend(config.backend);
  ExplanationCache cache = config.cache_path.empty()
                               ? ExplanationCache()
                               : ExplanationCache(config.cache_path);
  return run_multi(config, backend.get(), &cache);
}

RunAggregate aggregate_runs(const std::vector<RunResult>& runs) {
  if (runs.empty()) throw ArgumentError("aggregate_runs requires at least one run");

  RunAggregate out;
  out.runs = runs.size();
  for (const auto& run : runs) out.seeds.push_back(run.seed);

  auto stat = [&](auto metric_of) {
    std::vector<double> values;
    values.reserve(runs.size());
    for (const auto& run : runs) values.push_back(metric_of(run.metrics));
    return aggregate(values);
  };
  auto prf_stat = [&](auto prf_of) {
    PrfStat s;
    s.precision = stat([&](const MetricsReport& m) { return prf_of(m).precision; });
    s.recall = stat([&](const MetricsReport& m) { return prf_of(m).recall; });
    s.f1 = stat([&](const MetricsReport& m) { return prf_of(m).f1; });
    return s;
  };

  for (std::size_t k = 0; k < kNumEmotions; ++k) {
    out.per_label[k] = prf_stat([k](const MetricsReport& m) { return m.per_label[k]; });
  }
  out.macro = prf_stat([](const MetricsReport& m) { return m.macro; });
  out.micro = prf_stat([](const MetricsReport& m) { return m.micro; });
  return out;
}

nlohmann::json RunAggregate::to_json() const {
  nlohmann::json per_label_json;
  for (std::size_t k = 0; k < kNumEmotions; ++k) {
    per_label_json[std::string(kEmotionNames[k])] = prf_stat_json(per_label[k]);
  }
  nlohmann::json seeds_json = nlohmann::json::array();
  for (auto seed : seeds) seeds_json.push_back(seed);
  return nlohmann::json{{"runs", runs},
                        {"seeds", seeds_json},
                        {"per_label", per_label_json},
                        {"macro", prf_stat_json(macro)},
                        {"micro", prf_stat_json(micro)}};
}

void write_predictions_jsonl(const std::vector<PredictionRecord>& predictions,
                             const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open predictions file for writing: " + path.string());
  for (const auto& record : predictions) {
    out << record.to_json().dump() << '\n';
  }
  if (!out) throw IoError("failed writing predictions file: " + path.string());
}

std::vector<PredictionRecord> read_predictions_jsonl(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open predictions file: " + path.string());
  std::vector<PredictionRecord> records;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    nlohmann::json j = nlohmann::json::parse(line, nullptr, false);
    if (j.is_discarded()) {
      throw ValidationError("predictions file " + path.string() + " line " +
                            std::to_string(line_no) + " is not valid JSON");
    }
    records.push_back(PredictionRecord::from_json(j));
  }
  return records;
}

void write_json_file(const nlohmann::json& j, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open file for writing: " + path.string());
  out << j.dump(2) << '\n';
  if (!out) throw IoError("failed writing file: " + path.string());
}

nlohmann::json read_json_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open file: " + path.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(path.string() + " is not valid JSON: " + e.what());
  }
  return j;
}

}  // namespace lotus
