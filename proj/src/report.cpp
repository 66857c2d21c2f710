#include "lotus/report.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <unordered_map>

#include "lotus/csv.hpp"
#include "lotus/errors.hpp"

namespace lotus {

namespace {

std::string markdown_cell(std::string_view text) {
  std::string out;
  out.reserve(text.size());
  for (char c : text) {
    if (c == '|') out += "\\|";
    else out.push_back(c);
  }
  return out;
}

std::string markdown_row(const std::vector<std::string>& cells) {
  std::string out = "|";
  for (const auto& cell : cells) {
    out += ' ';
    out += markdown_cell(cell);
    out += " |";
  }
  out += '\n';
  return out;
}

std::string markdown_separator(std::size_t columns) {
  std::string out = "|";
  for (std::size_t i = 0; i < columns; ++i) out += " --- |";
  out += '\n';
  return out;
}

std::string mark(const std::string& value, bool is_max, TableFormat format) {
  if (!is_max) return value;
  return format == TableFormat::markdown ? "**" + value + "**" : value + "*";
}

// Column-wise maxima by exact mean comparison; ties all win.
std::vector<bool> max_flags(const std::vector<double>& values) {
  std::vector<bool> flags(values.size(), false);
  if (values.empty()) return flags;
  const double best = *std::max_element(values.begin(), values.end());
  for (std::size_t i = 0; i < values.size(); ++i) flags[i] = values[i] == best;
  return flags;
}

std::string render_table(const std::vector<std::string>& header,
                         const std::vector<std::vector<std::string>>& rows,
                         TableFormat format) {
  std::string out;
  if (format == TableFormat::markdown) {
    out += markdown_row(header);
    out += markdown_separator(header.size());
    for (const auto& row : rows) out += markdown_row(row);
  } else {
    out += csv::format_row(header);
    for (const auto& row : rows) out += csv::format_row(row);
  }
  return out;
}

}  // namespace

std::string format_fixed4(double value) {
  // nearbyint under the default rounding mode gives ties-to-even on the
  // scaled value, matching the tables' 4-decimal convention.
  const double scaled = std::nearbyint(value * 10000.0);
  long long n = static_cast<long long>(scaled);
  const bool negative = n < 0;
  if (negative) n = -n;
  char buffer[40];
  std::snprintf(buffer, sizeof(buffer), "%s%lld.%04lld", negative ? "-" : "", n / 10000,
                n % 10000);
  return buffer;
}

std::string format_mean_std(const MeanStd& value) {
  return format_fixed4(value.mean) + " ± " + format_fixed4(value.std);
}

std::string overall_table(std::span<const MethodAggregate> results, TableFormat format) {
  if (results.empty()) throw ArgumentError("overall_table requires at least one method");

  struct Column {
    std::string title;
    std::string csv_title;
    const MeanStd& (*pick)(const RunAggregate&);
  };
  static const std::array<Column, 6> columns = {{
      {"Macro P", "macro_precision", [](const RunAggregate& a) -> const MeanStd& { return a.macro.precision; }},
      {"Macro R", "macro_recall", [](const RunAggregate& a) -> const MeanStd& { return a.macro.recall; }},
      {"Macro F1", "macro_f1", [](const RunAggregate& a) -> const MeanStd& { return a.macro.f1; }},
      {"Micro P", "micro_precision", [](const RunAggregate& a) -> const MeanStd& { return a.micro.precision; }},
      {"Micro R", "micro_recall", [](const RunAggregate& a) -> const MeanStd& { return a.micro.recall; }},
      {"Micro F1", "micro_f1", [](const RunAggregate& a) -> const MeanStd& { return a.micro.f1; }},
  }};

  std::vector<std::string> header{format == TableFormat::markdown ? "Method" : "method"};
  for (const auto& column : columns) {
    header.push_back(format == TableFormat::markdown ? column.title : column.csv_title);
  }

  std::vector<std::vector<std::string>> rows(results.size());
  for (std::size_t r = 0; r < results.size(); ++r) {
    rows[r].push_back(results[r].name);
  }
  for (const auto& column : columns) {
    std::vector<double> means;
    means.reserve(results.size());
    for (const auto& result : results) means.push_back(column.pick(result.aggregate).mean);
    const auto flags = max_flags(means);
    for (std::size_t r = 0; r < results.size(); ++r) {
      rows[r].push_back(
          mark(format_mean_std(column.pick(results[r].aggregate)), flags[r], format));
    }
  }
  return render_table(header, rows, format);
}

std::string per_emotion_table(std::span<const MethodPerLabel> results, TableFormat format) {
  if (results.empty()) throw ArgumentError("per_emotion_table requires at least one method");

  for (const auto& method : results) {
    for (const auto& name : kEmotionNames) {
      if (method.per_label.find(std::string(name)) == method.per_label.end()) {
        throw ConsistencyError("method '" + method.name + "' is missing metrics for label '" +
                               std::string(name) + "'");
      }
    }
  }

  struct Metric {
    std::string title;
    double (*pick)(const Prf&);
  };
  static const std::array<Metric, 3> metrics = {{
      {"P", [](const Prf& p) { return p.precision; }},
      {"R", [](const Prf& p) { return p.recall; }},
      {"F1", [](const Prf& p) { return p.f1; }},
  }};

  std::vector<std::string> header{format == TableFormat::markdown ? "Emotion" : "emotion"};
  for (const auto& method : results) {
    for (const auto& metric : metrics) {
      header.push_back(format == TableFormat::markdown
                           ? method.name + " " + metric.title
                           : method.name + "_" + metric.title);
    }
  }

  std::vector<std::vector<std::string>> rows;
  rows.reserve(kNumEmotions);
  for (const auto& emotion : kEmotionNames) {
    std::vector<std::string> row(1 + results.size() * metrics.size());
    row[0] = std::string(emotion);
    for (std::size_t mi = 0; mi < metrics.size(); ++mi) {
      std::vector<double> values;
      values.reserve(results.size());
      for (const auto& method : results) {
        values.push_back(metrics[mi].pick(method.per_label.at(std::string(emotion))));
      }
      const auto flags = max_flags(values);
      // Columns interleave per method: method0 P R F1, method1 P R F1, ...
      for (std::size_t m = 0; m < results.size(); ++m) {
        row[1 + m * metrics.size() + mi] = mark(format_fixed4(values[m]), flags[m], format);
      }
    }
    rows.push_back(std::move(row));
  }
  return render_table(header, rows, format);
}

std::vector<ErrorBucket> error_analysis(
    const Dataset& dataset, std::span<const PredictionRecord> predictions,
    const std::map<std::string, std::string>* explanation_by_id, double threshold) {
  std::unordered_map<std::string, const PredictionRecord*> by_id;
  by_id.reserve(predictions.size());
  for (const auto& record : predictions) {
    if (!by_id.emplace(record.example_id, &record).second) {
      throw ConsistencyError("duplicate prediction for example '" + record.example_id + "'");
    }
  }
  std::size_t matched = 0;

  std::vector<ErrorBucket> buckets;
  buckets.reserve(kNumEmotions * 2);
  for (std::size_t k = 0; k < kNumEmotions; ++k) {
    ErrorBucket fp{std::string(kEmotionNames[k]), ErrorKind::false_positive, {}};
    ErrorBucket fn{std::string(kEmotionNames[k]), ErrorKind::false_negative, {}};

    for (const auto& example : dataset.examples) {
      auto it = by_id.find(example.id);
      if (it == by_id.end()) {
        throw ConsistencyError("no prediction for example '" + example.id + "'");
      }
      if (k == 0) ++matched;
      const PredictionRecord& record = *it->second;
      const bool gold = example.labels[k] != 0;
      const bool predicted = record.decisions[k] != 0;
      if (gold == predicted) continue;

      ErrorEntry entry;
      entry.example_id = example.id;
      entry.text = example.text;
      if (explanation_by_id != nullptr) {
        auto e = explanation_by_id->find(example.id);
        if (e != explanation_by_id->end()) entry.explanation = e->second;
      }
      entry.probabilities = record.probabilities;
      (predicted ? fp : fn).entries.push_back(std::move(entry));
    }

    auto by_confidence = [k, threshold](const ErrorEntry& a, const ErrorEntry& b) {
      return std::abs(a.probabilities[k] - threshold) >
             std::abs(b.probabilities[k] - threshold);
    };
    std::stable_sort(fp.entries.begin(), fp.entries.end(), by_confidence);
    std::stable_sort(fn.entries.begin(), fn.entries.end(), by_confidence);
    buckets.push_back(std::move(fp));
    buckets.push_back(std::move(fn));
  }

  if (matched != predictions.size()) {
    std::string unknown;
    for (const auto& record : predictions) {
      bool found = false;
      for (const auto& example : dataset.examples) {
        if (example.id == record.example_id) {
          found = true;
          break;
        }
      }
      if (!found) {
        if (!unknown.empty()) unknown += ", ";
        unknown += record.example_id;
      }
    }
    throw ConsistencyError("predictions refer to unknown example ids: " + unknown);
  }
  return buckets;
}

std::string render_error_report(const ErrorBucket& false_positives,
                                const ErrorBucket& false_negatives, double threshold) {
  if (false_positives.label != false_negatives.label ||
      false_positives.kind != ErrorKind::false_positive ||
      false_negatives.kind != ErrorKind::false_negative) {
    throw ArgumentError("render_error_report expects the FP and FN buckets of one label");
  }
  const std::string& label = false_positives.label;
  const std::size_t label_index = emotion_index(label);

  std::string out = "# Error analysis: " + label + "\n\n";
  out += "Decision threshold: " + format_fixed4(threshold) + "\n";

  auto section = [&](const ErrorBucket& bucket, const char* title) {
    out += "\n## " + std::string(title) + " (" + std::to_string(bucket.entries.size()) +
           ")\n\n";
    if (bucket.entries.empty()) {
      out += "None.\n";
      return;
    }
    out += markdown_row({"Example", "P(" + label + ")", "Text", "Explanation"});
    out += markdown_separator(4);
    for (const auto& entry : bucket.entries) {
      out += markdown_row({entry.example_id, format_fixed4(entry.probabilities[label_index]),
                           entry.text, entry.explanation});
    }
  };
  section(false_positives, "False positives (predicted 1, gold 0)");
  section(false_negatives, "False negatives (predicted 0, gold 1)");
  return out;
}

}  // namespace lotus
