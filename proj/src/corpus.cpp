#include "lotus/corpus.hpp"

#include <fstream>
#include <unordered_set>

#include "lotus/csv.hpp"
#include "lotus/errors.hpp"
#include "lotus/rng.hpp"

namespace lotus {

namespace {

bool is_space(unsigned char c) {
  return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v';
}

bool blank_after_trim(const std::string& s) {
  for (unsigned char c : s) {
    if (!is_space(c)) return false;
  }
  return true;
}

void check_header(const csv::Row& header) {
  if (header.size() != kDatasetHeader.size()) {
    throw SchemaError("dataset header has " + std::to_string(header.size()) +
                      " columns, expected " + std::to_string(kDatasetHeader.size()) +
                      " (id,text,anger,fear,joy,sadness,surprise)");
  }
  for (std::size_t i = 0; i < kDatasetHeader.size(); ++i) {
    if (header[i] != kDatasetHeader[i]) {
      throw SchemaError("dataset header column " + std::to_string(i + 1) +
                        ": expected '" + std::string(kDatasetHeader[i]) + "', found '" +
                        header[i] + "'");
    }
  }
}

int parse_flag(const std::string& value, std::size_t record, std::string_view column) {
  if (value == "0") return 0;
  if (value == "1") return 1;
  throw ValidationError("row " + std::to_string(record) + ", column '" +
                        std::string(column) + "': label must be 0 or 1, got '" + value +
                        "'");
}

}  // namespace

void validate_split_name(const std::string& split_name) {
  if (split_name != "train" && split_name != "dev" && split_name != "test") {
    throw ArgumentError("split name must be one of train/dev/test, got '" + split_name +
                        "'");
  }
}

Dataset parse_dataset_text(std::string_view text, const std::string& split_name) {
  validate_split_name(split_name);
  auto rows = csv::parse_document(text);
  if (rows.empty()) {
    throw SchemaError("dataset is empty; expected the header "
                      "id,text,anger,fear,joy,sadness,surprise");
  }
  check_header(rows[0]);

  Dataset dataset;
  dataset.split_name = split_name;
  dataset.examples.reserve(rows.size() - 1);
  std::unordered_set<std::string> seen_ids;
  seen_ids.reserve(rows.size());

  for (std::size_t r = 1; r < rows.size(); ++r) {
    const auto& row = rows[r];
    const std::size_t record = r + 1;  // 1-based, header is record 1
    if (row.size() != kDatasetHeader.size()) {
      throw ValidationError("row " + std::to_string(record) + ": expected " +
                            std::to_string(kDatasetHeader.size()) + " fields, got " +
                            std::to_string(row.size()));
    }
    LabeledExample example;
    example.id = row[0];
    example.text = row[1];
    if (example.id.empty()) {
      throw ValidationError("row " + std::to_string(record) + ": empty id");
    }
    if (blank_after_trim(example.text)) {
      throw ValidationError("row " + std::to_string(record) + " (id '" + example.id +
                            "'): text is empty after trimming");
    }
    if (!seen_ids.insert(example.id).second) {
      throw ValidationError("row " + std::to_string(record) + ": duplicate id '" +
                            example.id + "'");
    }
    for (std::size_t k = 0; k < kNumEmotions; ++k) {
      example.labels[k] = static_cast<std::uint8_t>(
          parse_flag(row[2 + k], record, kEmotionNames[k]));
    }
    dataset.examples.push_back(std::move(example));
  }
  return dataset;
}

Dataset parse_dataset(const std::filesystem::path& path, const std::string& split_name) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw IoError("cannot open dataset file: " + path.string());
  }
  std::string content((std::istreambuf_iterator<char>(in)),
                      std::istreambuf_iterator<char>());
  if (in.bad()) {
    throw IoError("failed reading dataset file: " + path.string());
  }
  return parse_dataset_text(content, split_name);
}

std::string format_dataset(const Dataset& dataset) {
  std::string out;
  csv::Row header(kDatasetHeader.begin(), kDatasetHeader.end());
  out += csv::format_row(header);
  for (const auto& example : dataset.examples) {
    csv::Row row;
    row.reserve(kDatasetHeader.size());
    row.push_back(example.id);
    row.push_back(example.text);
    for (std::size_t k = 0; k < kNumEmotions; ++k) {
      row.push_back(example.labels[k] ? "1" : "0");
    }
    out += csv::format_row(row);
  }
  return out;
}

void write_dataset(const Dataset& dataset, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) {
    throw IoError("cannot open file for writing: " + path.string());
  }
  out << format_dataset(dataset);
  if (!out) {
    throw IoError("failed writing dataset file: " + path.string());
  }
}

DistributionStats label_distribution(const Dataset& dataset) {
  DistributionStats stats;
  stats.total_examples = dataset.examples.size();
  for (const auto& example : dataset.examples) {
    for (std::size_t k = 0; k < kNumEmotions; ++k) {
      stats.per_label_positive_count[k] += example.labels[k];
    }
  }
  return stats;
}

nlohmann::json stats_to_json(const Dataset& dataset, const DistributionStats& stats) {
  nlohmann::json counts;
  for (std::size_t k = 0; k < kNumEmotions; ++k) {
    counts[std::string(kEmotionNames[k])] = stats.per_label_positive_count[k];
  }
  return nlohmann::json{{"split", dataset.split_name},
                        {"total", stats.total_examples},
                        {"counts", counts}};
}

std::vector<LabeledExample> sample_seed_corpus(const Dataset& dataset, std::size_t n,
                                               std::uint64_t seed) {
  if (n > dataset.examples.size()) {
    throw ArgumentError("sample size " + std::to_string(n) + " exceeds dataset size " +
                        std::to_string(dataset.examples.size()));
  }
  auto order = shuffle_indices(dataset.examples.size(), seed);
  std::vector<LabeledExample> sample;
  sample.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    sample.push_back(dataset.examples[order[i]]);
  }
  return sample;
}

}  // namespace lotus
