// lotus — harness for explanation-augmented multi-label emotion
// classification. Subcommands cover the full flow: dataset stats, seed
// sampling, explanation generation, fine-tune job export, training,
// prediction, evaluation, multi-run experiments and report rendering.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <string>
#include <vector>

#include "lotus/corpus.hpp"
#include "lotus/errors.hpp"
#include "lotus/explainer.hpp"
#include "lotus/pipeline.hpp"
#include "lotus/report.hpp"

#include <CLI11.hpp>
#include <json.hpp>

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct CommonArgs {
  std::string config_path;
  std::string backend_kind;  // shorthand for --set backend.kind=...
  std::vector<std::string> overrides;  // dotted key=value pairs
};

void add_common(CLI::App* sub, CommonArgs& args) {
  sub->add_option("--config", args.config_path, "experiment config (JSON)");
  sub->add_option("--backend", args.backend_kind,
                  "explanation backend kind (stub|external-command|external-http)");
  sub->add_option("--set", args.overrides,
                  "override a config key, e.g. --set train.epochs=20 "
                  "(repeatable; value parsed as JSON when possible)");
}

void apply_override(json& config, const std::string& spec) {
  const auto eq = spec.find('=');
  if (eq == std::string::npos || eq == 0) {
    throw lotus::ArgumentError("override must look like key=value, got '" + spec + "'");
  }
  const std::string key = spec.substr(0, eq);
  const std::string value = spec.substr(eq + 1);

  json* node = &config;
  std::size_t start = 0;
  while (true) {
    const auto dot = key.find('.', start);
    const std::string part =
        key.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
    if (part.empty()) {
      throw lotus::ArgumentError("override key has an empty segment: '" + key + "'");
    }
    if (dot == std::string::npos) {
      // Keep strings as strings when the key already holds one, so e.g.
      // backend.command=false stays a shell command, not a boolean.
      if (node->contains(part) && (*node)[part].is_string()) {
        (*node)[part] = value;
        return;
      }
      json parsed = json::parse(value, nullptr, false);
      (*node)[part] = parsed.is_discarded() ? json(value) : parsed;
      return;
    }
    node = &((*node)[part]);
    start = dot + 1;
  }
}

// defaults < config file < LOTUS_CACHE < flags and --set overrides.
json resolve_config_json(const CommonArgs& args) {
  json resolved = lotus::ExperimentConfig{}.to_json();
  if (!args.config_path.empty()) {
    resolved.merge_patch(lotus::read_json_file(args.config_path));
  }
  if (const char* env = std::getenv("LOTUS_CACHE")) {
    if (*env != '\0') resolved["cache_path"] = env;
  }
  if (!args.backend_kind.empty()) {
    resolved["backend"]["kind"] = args.backend_kind;
  }
  for (const auto& override_spec : args.overrides) {
    apply_override(resolved, override_spec);
  }
  return resolved;
}

void persist_resolved_config(const json& resolved, const fs::path& out_dir) {
  fs::create_directories(out_dir);
  lotus::write_json_file(resolved, out_dir / "resolved_config.json");
}

void write_text_file(const std::string& content, const fs::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw lotus::IoError("cannot open file for writing: " + path.string());
  out << content;
  if (!out) throw lotus::IoError("failed writing file: " + path.string());
}

void emit(const std::string& content, const std::string& out_path) {
  if (out_path.empty()) {
    std::cout << content;
  } else {
    const fs::path path(out_path);
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    write_text_file(content, path);
  }
}

std::unique_ptr<lotus::ExplanationCache> open_cache(const lotus::ExperimentConfig& config) {
  if (config.cache_path.empty()) return std::make_unique<lotus::ExplanationCache>();
  return std::make_unique<lotus::ExplanationCache>(config.cache_path);
}

lotus::TextTransform build_transform(const lotus::ExperimentConfig& config,
                                     const std::vector<lotus::LabeledExample>& examples,
                                     lotus::ExplanationBackend& backend,
                                     lotus::ExplanationCache& cache) {
  const auto& prompt = lotus::PromptTemplate::for_version(config.prompt_version);
  const auto explanations = lotus::generate_for_dataset(backend, prompt, examples, cache,
                                                        config.backend.max_parallel);
  std::unordered_map<std::string, std::string> by_text;
  by_text.reserve(examples.size());
  for (std::size_t i = 0; i < examples.size(); ++i) {
    by_text[examples[i].text] = explanations[i].text;
  }
  return lotus::make_augment_transform(std::move(by_text));
}

std::map<std::string, lotus::Prf> per_label_means(const lotus::RunAggregate& aggregate) {
  std::map<std::string, lotus::Prf> means;
  for (std::size_t k = 0; k < lotus::kNumEmotions; ++k) {
    means[std::string(lotus::kEmotionNames[k])] =
        lotus::Prf{aggregate.per_label[k].precision.mean, aggregate.per_label[k].recall.mean,
                   aggregate.per_label[k].f1.mean};
  }
  return means;
}

void write_mode_artifacts(const lotus::MultiRunOutput& output, const fs::path& mode_dir) {
  fs::create_directories(mode_dir);
  for (const auto& run : output.runs) {
    const std::string seed = std::to_string(run.seed);
    lotus::write_predictions_jsonl(run.predictions,
                                   mode_dir / ("predictions_" + seed + ".jsonl"));
    lotus::write_json_file(run.metrics.to_json(), mode_dir / ("metrics_" + seed + ".json"));
  }
  lotus::write_json_file(output.aggregate.to_json(), mode_dir / "aggregate.json");
}

void write_error_reports(const lotus::Dataset& test, const lotus::RunResult& run,
                         const std::map<std::string, std::string>* explanations,
                         double threshold, const fs::path& mode_dir) {
  const auto buckets = lotus::error_analysis(test, run.predictions, explanations, threshold);
  for (std::size_t k = 0; k < lotus::kNumEmotions; ++k) {
    const auto& fp = buckets[2 * k];
    const auto& fn = buckets[2 * k + 1];
    write_text_file(lotus::render_error_report(fp, fn, threshold),
                    mode_dir / ("errors_" + fp.label + ".md"));
  }
}

int dispatch(int argc, char** argv) {
  CLI::App app{"explanation-augmented multi-label emotion classification harness"};
  app.require_subcommand(1);

  // ---- stats ----
  auto* stats_cmd = app.add_subcommand("stats", "class distribution of a dataset CSV");
  std::string stats_data;
  std::string stats_split = "train";
  stats_cmd->add_option("--data", stats_data, "dataset CSV")->required();
  stats_cmd->add_option("--split", stats_split, "split name (train|dev|test)");
  stats_cmd->callback([&] {
    const auto dataset = lotus::parse_dataset(stats_data, stats_split);
    std::cout << lotus::stats_to_json(dataset, lotus::label_distribution(dataset)).dump(2)
              << '\n';
  });

  // ---- sample-seed ----
  auto* sample_cmd =
      app.add_subcommand("sample-seed", "sample the explanation seed corpus");
  std::string sample_data;
  std::string sample_split = "train";
  std::string sample_out;
  std::size_t sample_n = 150;
  std::int64_t sample_seed = 7;
  sample_cmd->add_option("--data", sample_data, "dataset CSV")->required();
  sample_cmd->add_option("--split", sample_split, "split name");
  sample_cmd->add_option("--n", sample_n, "sample size (default 150)");
  sample_cmd->add_option("--seed", sample_seed, "sampler seed");
  sample_cmd->add_option("--out", sample_out, "output CSV (default stdout)");
  sample_cmd->callback([&] {
    const auto dataset = lotus::parse_dataset(sample_data, sample_split);
    const auto sample = lotus::sample_seed_corpus(
        dataset, sample_n, static_cast<std::uint64_t>(sample_seed));
    lotus::Dataset out{dataset.split_name, sample};
    emit(lotus::format_dataset(out), sample_out);
  });

  // ---- explain ----
  auto* explain_cmd =
      app.add_subcommand("explain", "generate explanations for a dataset");
  CommonArgs explain_common;
  add_common(explain_cmd, explain_common);
  std::string explain_data;
  std::string explain_split = "train";
  std::string explain_out;
  explain_cmd->add_option("--data", explain_data, "dataset CSV (default: config train_path)");
  explain_cmd->add_option("--split", explain_split, "split name");
  explain_cmd->add_option("--out", explain_out, "output JSONL (default stdout)");
  explain_cmd->callback([&] {
    const json resolved = resolve_config_json(explain_common);
    const auto config = lotus::ExperimentConfig::from_json(resolved);
    const std::string data = explain_data.empty() ? config.train_path : explain_data;
    if (data.empty()) {
      throw lotus::ArgumentError("explain needs --data or a config train_path");
    }
    const auto dataset = lotus::parse_dataset(data, explain_split);
    auto backend = lotus::make_backend(config.backend);
    auto cache = open_cache(config);
    const auto& prompt = lotus::PromptTemplate::for_version(config.prompt_version);
    const auto explanations = lotus::generate_for_dataset(
        *backend, prompt, dataset.examples, *cache, config.backend.max_parallel);
    std::string lines;
    for (const auto& explanation : explanations) {
      lines += explanation.to_json().dump();
      lines += '\n';
    }
    emit(lines, explain_out);
    if (!explain_out.empty()) {
      persist_resolved_config(resolved, fs::path(explain_out).parent_path().empty()
                                            ? fs::path(".")
                                            : fs::path(explain_out).parent_path());
    }
  });

  // ---- export-finetune ----
  auto* finetune_cmd = app.add_subcommand(
      "export-finetune", "export the phase-1 fine-tune job descriptor");
  CommonArgs finetune_common;
  add_common(finetune_cmd, finetune_common);
  std::string finetune_data;
  std::string finetune_out;
  std::size_t finetune_n = 150;
  std::int64_t finetune_seed = 7;
  finetune_cmd->add_option("--data", finetune_data, "training CSV (default: config train_path)");
  finetune_cmd->add_option("--n", finetune_n, "seed corpus size (default 150)");
  finetune_cmd->add_option("--seed", finetune_seed, "sampler seed");
  finetune_cmd->add_option("--out", finetune_out, "job descriptor path")->required();
  finetune_cmd->callback([&] {
    const json resolved = resolve_config_json(finetune_common);
    const auto config = lotus::ExperimentConfig::from_json(resolved);
    const std::string data = finetune_data.empty() ? config.train_path : finetune_data;
    if (data.empty()) {
      throw lotus::ArgumentError("export-finetune needs --data or a config train_path");
    }
    const auto dataset = lotus::parse_dataset(data, "train");
    const auto seed_corpus = lotus::sample_seed_corpus(
        dataset, finetune_n, static_cast<std::uint64_t>(finetune_seed));

    auto backend = lotus::make_backend(config.backend);
    auto cache = open_cache(config);
    const auto& prompt = lotus::PromptTemplate::for_version(config.prompt_version);
    const auto explanations = lotus::generate_for_dataset(
        *backend, prompt, seed_corpus, *cache, config.backend.max_parallel);

    const fs::path out_path(finetune_out);
    const fs::path dir =
        out_path.has_parent_path() ? out_path.parent_path() : fs::path(".");
    fs::create_directories(dir);
    const std::string stem = out_path.stem().string();

    const fs::path seed_path = dir / (stem + "_seed_corpus.csv");
    lotus::write_dataset(lotus::Dataset{"train", seed_corpus}, seed_path);
    const fs::path expl_path = dir / (stem + "_explanations.jsonl");
    std::string lines;
    for (const auto& explanation : explanations) {
      lines += explanation.to_json().dump();
      lines += '\n';
    }
    write_text_file(lines, expl_path);

    auto spec = lotus::FinetuneJobSpec::from_json(resolved.value("finetune", json::object()));
    spec.seed_corpus_ref = seed_path.string();
    spec.explanation_corpus_ref = expl_path.string();
    lotus::export_finetune_job(spec, seed_corpus, explanations, prompt, out_path);
    persist_resolved_config(resolved, dir);
    std::cerr << "wrote " << out_path.string() << " (" << seed_corpus.size() << " pairs)\n";
  });

  // ---- train ----
  auto* train_cmd = app.add_subcommand("train", "train a classifier in the configured mode");
  CommonArgs train_common;
  add_common(train_cmd, train_common);
  std::string train_mode;
  std::string train_out;
  std::int64_t train_seed = 0;
  bool train_seed_set = false;
  train_cmd->add_option("--mode", train_mode, "text_only|text_plus_explanation");
  train_cmd->add_option("--seed", train_seed, "training seed")->each([&](const std::string&) {
    train_seed_set = true;
  });
  train_cmd->add_option("--out", train_out, "model file")->required();
  train_cmd->callback([&] {
    json resolved = resolve_config_json(train_common);
    if (!train_mode.empty()) resolved["mode"] = train_mode;
    const auto config = lotus::ExperimentConfig::from_json(resolved);
    if (config.train_path.empty()) {
      throw lotus::ArgumentError("train needs a config train_path");
    }
    const auto dataset = lotus::parse_dataset(config.train_path, "train");

    lotus::TextTransform transform;
    std::unique_ptr<lotus::ExplanationBackend> backend;
    std::unique_ptr<lotus::ExplanationCache> cache;
    if (config.mode == lotus::Mode::text_plus_explanation) {
      backend = lotus::make_backend(config.backend);
      cache = open_cache(config);
      transform = build_transform(config, dataset.examples, *backend, *cache);
    }

    std::vector<lotus::TrainExample> examples;
    examples.reserve(dataset.size());
    for (const auto& example : dataset.examples) {
      examples.push_back({example.text, example.labels});
    }
    lotus::TrainConfig train_config = config.train;
    if (train_seed_set) train_config.seed = train_seed;
    const auto result = lotus::train(examples, train_config, transform);

    const fs::path out_path(train_out);
    const fs::path dir =
        out_path.has_parent_path() ? out_path.parent_path() : fs::path(".");
    fs::create_directories(dir);
    lotus::save_model(result.params, out_path);
    persist_resolved_config(resolved, dir);
    std::cerr << "trained on " << dataset.size() << " examples; final epoch mean loss "
              << result.epoch_mean_loss.back() << '\n';
  });

  // ---- predict ----
  auto* predict_cmd = app.add_subcommand("predict", "predict with a saved model");
  CommonArgs predict_common;
  add_common(predict_cmd, predict_common);
  std::string predict_model;
  std::string predict_data;
  std::string predict_split = "test";
  std::string predict_mode;
  std::string predict_out;
  predict_cmd->add_option("--model", predict_model, "model file")->required();
  predict_cmd->add_option("--data", predict_data, "dataset CSV")->required();
  predict_cmd->add_option("--split", predict_split, "split name");
  predict_cmd->add_option("--mode", predict_mode, "text_only|text_plus_explanation");
  predict_cmd->add_option("--out", predict_out, "predictions JSONL (default stdout)");
  predict_cmd->callback([&] {
    json resolved = resolve_config_json(predict_common);
    if (!predict_mode.empty()) resolved["mode"] = predict_mode;
    const auto config = lotus::ExperimentConfig::from_json(resolved);
    const auto dataset = lotus::parse_dataset(predict_data, predict_split);
    const auto model = lotus::load_model(predict_model);

    lotus::TextTransform transform;
    std::unique_ptr<lotus::ExplanationBackend> backend;
    std::unique_ptr<lotus::ExplanationCache> cache;
    if (config.mode == lotus::Mode::text_plus_explanation) {
      backend = lotus::make_backend(config.backend);
      cache = open_cache(config);
      transform = build_transform(config, dataset.examples, *backend, *cache);
    }

    std::vector<lotus::PredictionRecord> records;
    records.reserve(dataset.size());
    for (const auto& example : dataset.examples) {
      const std::string text = transform ? transform(example.text) : example.text;
      lotus::PredictionRecord record;
      record.example_id = example.id;
      record.probabilities =
          lotus::predict_proba(model, lotus::features_for_text(text, model.config));
      record.decisions = lotus::decide(record.probabilities, model.config.threshold);
      records.push_back(std::move(record));
    }
    std::string lines;
    for (const auto& record : records) {
      lines += record.to_json().dump();
      lines += '\n';
    }
    emit(lines, predict_out);
  });

  // ---- evaluate ----
  auto* eval_cmd = app.add_subcommand("evaluate", "score predictions against gold labels");
  std::string eval_data;
  std::string eval_split = "test";
  std::string eval_pred;
  std::string eval_out;
  eval_cmd->add_option("--data", eval_data, "gold dataset CSV")->required();
  eval_cmd->add_option("--split", eval_split, "split name");
  eval_cmd->add_option("--pred", eval_pred, "predictions JSONL")->required();
  eval_cmd->add_option("--out", eval_out, "metrics JSON (default stdout)");
  eval_cmd->callback([&] {
    const auto dataset = lotus::parse_dataset(eval_data, eval_split);
    const auto records = lotus::read_predictions_jsonl(eval_pred);
    if (records.size() != dataset.size()) {
      throw lotus::ConsistencyError("prediction count " + std::to_string(records.size()) +
                                    " does not match dataset size " +
                                    std::to_string(dataset.size()));
    }
    std::map<std::string, const lotus::PredictionRecord*> by_id;
    for (const auto& record : records) {
      if (!by_id.emplace(record.example_id, &record).second) {
        throw lotus::ConsistencyError("duplicate prediction for example '" +
                                      record.example_id + "'");
      }
    }
    std::vector<lotus::EmotionLabelSet> gold;
    std::vector<lotus::EmotionLabelSet> pred;
    gold.reserve(dataset.size());
    pred.reserve(dataset.size());
    for (const auto& example : dataset.examples) {
      auto it = by_id.find(example.id);
      if (it == by_id.end()) {
        throw lotus::ConsistencyError("no prediction for example '" + example.id + "'");
      }
      gold.push_back(example.labels);
      pred.push_back(it->second->decisions);
    }
    const auto report = lotus::evaluate(gold, pred);
    emit(report.to_json().dump(2) + "\n", eval_out);
  });

  // ---- run ----
  auto* run_cmd = app.add_subcommand(
      "run", "full multi-run comparison (text_only vs text_plus_explanation)");
  CommonArgs run_common;
  add_common(run_cmd, run_common);
  std::string run_out;
  run_cmd->add_option("--out", run_out, "output directory")->required();
  run_cmd->callback([&] {
    json resolved = resolve_config_json(run_common);
    const fs::path out_dir(run_out);
    if (resolved.value("cache_path", "").empty()) {
      resolved["cache_path"] = (out_dir / "cache.jsonl").string();
    }
    persist_resolved_config(resolved, out_dir);

    auto base_config = lotus::ExperimentConfig::from_json(resolved);
    lotus::ExplanationCache cache(base_config.cache_path);
    auto backend = lotus::make_backend(base_config.backend);

    std::vector<lotus::MethodAggregate> aggregates;
    std::vector<lotus::MethodPerLabel> per_label;

    for (const auto mode :
         {lotus::Mode::text_only, lotus::Mode::text_plus_explanation}) {
      auto config = base_config;
      config.mode = mode;
      const bool with_explanations = mode == lotus::Mode::text_plus_explanation;
      const auto output = lotus::run_multi(config, with_explanations ? backend.get() : nullptr,
                                           with_explanations ? &cache : nullptr);

      const fs::path mode_dir = out_dir / to_string(mode);
      write_mode_artifacts(output, mode_dir);

      const auto test = lotus::parse_dataset(config.test_path, "test");
      std::map<std::string, std::string> explanations;
      if (with_explanations) {
        const auto& prompt = lotus::PromptTemplate::for_version(config.prompt_version);
        for (const auto& example : test.examples) {
          // All cache hits: run_multi already resolved every test example.
          explanations[example.id] =
              lotus::generate_explanation(*backend, prompt, example, cache).text;
        }
      }
      write_error_reports(test, output.runs.front(),
                          with_explanations ? &explanations : nullptr,
                          config.train.threshold, mode_dir);

      aggregates.push_back({to_string(mode), output.aggregate});
      per_label.push_back({to_string(mode), per_label_means(output.aggregate)});
    }

    std::string md = "# Overall performance\n\n";
    md += lotus::overall_table(aggregates, lotus::TableFormat::markdown);
    md += "\n# Per-emotion performance\n\n";
    md += lotus::per_emotion_table(per_label, lotus::TableFormat::markdown);
    md += "\nZero-division rule: precision/recall/F1 are 0 when their denominator is 0.\n";
    write_text_file(md, out_dir / "report.md");

    std::string csv_text = lotus::overall_table(aggregates, lotus::TableFormat::csv);
    csv_text += lotus::per_emotion_table(per_label, lotus::TableFormat::csv);
    write_text_file(csv_text, out_dir / "report.csv");
    std::cerr << "wrote artifacts to " << out_dir.string() << '\n';
  });

  // ---- report ----
  auto* report_cmd =
      app.add_subcommand("report", "re-render tables from stored aggregates");
  std::string report_dir;
  std::string report_format = "md";
  report_cmd->add_option("--out", report_dir, "directory holding <mode>/aggregate.json")
      ->required();
  report_cmd
      ->add_option("--format", report_format, "md|csv (default md)")
      ->check(CLI::IsMember({"md", "csv"}));
  report_cmd->callback([&] {
    const fs::path out_dir(report_dir);
    std::vector<lotus::MethodAggregate> aggregates;
    std::vector<lotus::MethodPerLabel> per_label;
    for (const char* mode : {"text_only", "text_plus_explanation"}) {
      const fs::path aggregate_path = out_dir / mode / "aggregate.json";
      if (!fs::exists(aggregate_path)) continue;
      const json j = lotus::read_json_file(aggregate_path);
      lotus::RunAggregate aggregate;
      aggregate.runs = j.at("runs").get<std::size_t>();
      for (std::size_t k = 0; k < lotus::kNumEmotions; ++k) {
        const auto& label = j.at("per_label").at(std::string(lotus::kEmotionNames[k]));
        auto mean_std = [&](const char* metric) {
          return lotus::MeanStd{label.at(metric).at("mean").get<double>(),
                                label.at(metric).at("std").get<double>()};
        };
        aggregate.per_label[k] =
            lotus::PrfStat{mean_std("precision"), mean_std("recall"), mean_std("f1")};
      }
      auto top = [&](const char* group, const char* metric) {
        return lotus::MeanStd{j.at(group).at(metric).at("mean").get<double>(),
                              j.at(group).at(metric).at("std").get<double>()};
      };
      aggregate.macro = lotus::PrfStat{top("macro", "precision"), top("macro", "recall"),
                                       top("macro", "f1")};
      aggregate.micro = lotus::PrfStat{top("micro", "precision"), top("micro", "recall"),
                                       top("micro", "f1")};
      aggregates.push_back({mode, aggregate});
      per_label.push_back({mode, per_label_means(aggregate)});
    }
    if (aggregates.empty()) {
      throw lotus::DataError("no <mode>/aggregate.json found under " + out_dir.string());
    }
    const auto format =
        report_format == "md" ? lotus::TableFormat::markdown : lotus::TableFormat::csv;
    std::string content;
    if (format == lotus::TableFormat::markdown) {
      content += "# Overall performance\n\n";
      content += lotus::overall_table(aggregates, format);
      content += "\n# Per-emotion performance\n\n";
      content += lotus::per_emotion_table(per_label, format);
      content += "\nZero-division rule: precision/recall/F1 are 0 when their denominator is 0.\n";
    } else {
      content += lotus::overall_table(aggregates, format);
      content += lotus::per_emotion_table(per_label, format);
    }
    write_text_file(content, out_dir / (report_format == "md" ? "report.md" : "report.csv"));
    std::cerr << "wrote " << (out_dir / ("report." + report_format)).string() << '\n';
  });

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 1;
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return dispatch(argc, argv);
  } catch (const lotus::BackendError& e) {
    std::cerr << "backend error: " << e.what() << '\n';
    return 2;
  } catch (const lotus::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
}
