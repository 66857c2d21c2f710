#pragma once

#include <atomic>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "lotus/corpus.hpp"

#include <json.hpp>

namespace lotus {

// The instruction plus the rendering rule that turns an input sentence into
// the full prompt. The canonical template is versioned; any change to the
// instruction bytes or the layout requires a new version, because cache keys
// are derived from the version.
struct PromptTemplate {
  std::string version;
  std::string instruction;
  std::string layout;  // layout rule identifier, see build_prompt

  // The built-in template ("v1").
  static const PromptTemplate& canonical();

  // Template for a given version string. Only "v1" exists today; unknown
  // versions throw ValidationError.
  static const PromptTemplate& for_version(const std::string& version);

  // Rejects known-version templates whose instruction or layout bytes were
  // modified without bumping the version.
  void validate() const;

  friend bool operator==(const PromptTemplate&, const PromptTemplate&) = default;
};

// instruction + "\n\n" + "Text: " + text + "\n" + "Explanation:".
// The instruction bytes are never touched. Throws ArgumentError on empty
// text and ValidationError on a tampered template.
std::string build_prompt(const PromptTemplate& prompt, const std::string& text);

// A generated context sentence bound to its example, backend and template.
struct Explanation {
  std::string example_id;
  std::string text;  // non-empty, single paragraph
  std::string backend_id;
  std::string prompt_version;

  nlohmann::json to_json() const;

  friend bool operator==(const Explanation&, const Explanation&) = default;
};

// Ordered keyword -> clause mapping for the deterministic stub backend.
using CueMap = std::vector<std::pair<std::string, std::string>>;

// Rule-based test backend: "The speaker " + the clauses of every cue whose
// keyword occurs case-insensitively in `text`, joined by " and ", in
// cue_map order, plus a final period. With no match:
// "The speaker describes a situation."
std::string stub_explain(const std::string& text, const CueMap& cue_map);

// A small built-in cue map so stub runs on real data produce something
// sensible; tests supply their own.
const CueMap& default_cue_map();

enum class BackendKind { stub, external_command, external_http };

std::string to_string(BackendKind kind);
BackendKind backend_kind_from_string(const std::string& s);

struct BackendDescriptor {
  std::string backend_id = "stub-v1";
  BackendKind kind = BackendKind::stub;
  std::string endpoint;  // external-http: e.g. http://127.0.0.1:8080/explain
  std::string command;   // external-command: shell command line
  double timeout_seconds = 30.0;
  int max_parallel = 1;
  CueMap cue_map;  // stub only; empty means default_cue_map()

  void validate() const;
  nlohmann::json to_json() const;
  static BackendDescriptor from_json(const nlohmann::json& j);
};

struct ExplainRequest {
  std::string example_id;
  std::string text;    // the raw input sentence
  std::string prompt;  // build_prompt output, what external backends see
};

// Counts invocations so tests (and the text-only isolation check) can
// observe exactly how often the backend was hit. Implementations must be
// safe to call from several threads.
class ExplanationBackend {
 public:
  virtual ~ExplanationBackend() = default;

  std::string explain(const ExplainRequest& request) {
    invocations_.fetch_add(1, std::memory_order_relaxed);
    return do_explain(request);
  }

  std::uint64_t invocations() const { return invocations_.load(std::memory_order_relaxed); }

  virtual const std::string& id() const = 0;

 protected:
  virtual std::string do_explain(const ExplainRequest& request) = 0;

 private:
  std::atomic<std::uint64_t> invocations_{0};
};

// stub -> StubBackend, external-command -> pipe through a shell command
// (prompt on stdin, explanation on stdout, exit 0), external-http -> POST
// {"prompt": ...} expecting {"explanation": ...}.
std::unique_ptr<ExplanationBackend> make_backend(const BackendDescriptor& descriptor);

struct CacheEntry {
  std::string key;  // 16 hex chars, see ExplanationCache::make_key
  std::string example_id;
  std::string input_text;
  std::string explanation_text;
  std::string backend_id;
  std::string prompt_version;
  std::string created_at;  // UTC, ISO-8601

  nlohmann::json to_json() const;
  static CacheEntry from_json(const nlohmann::json& j);
};

// Append-only JSONL cache, one CacheEntry per line. On load, duplicate keys
// resolve last-write-wins; a trailing partial line (crash mid-write) is
// ignored. Reads and writes are safe from multiple threads; appends are
// serialized internally. Two concurrent misses for the same key may both
// reach the backend — the last write wins, which is harmless because
// backends are deterministic per (prompt_version, text).
class ExplanationCache {
 public:
  // In-memory only.
  ExplanationCache() = default;

  // Binds to a JSONL file, loading existing entries. The file is created
  // on first put.
  explicit ExplanationCache(std::filesystem::path file);

  static std::string make_key(const std::string& prompt_version,
                              const std::string& input_text);

  std::optional<CacheEntry> lookup(const std::string& key) const;
  void put(const CacheEntry& entry);

  std::size_t size() const;
  const std::filesystem::path& file() const { return file_; }

 private:
  mutable std::mutex mutex_;
  std::unordered_map<std::string, CacheEntry> entries_;
  std::filesystem::path file_;
};

// Cache-first explanation lookup. On a miss the backend is invoked exactly
// once, the response is normalized to a single paragraph (newline runs
// collapse to one space, surrounding whitespace trimmed) and persisted.
// Backend failures surface as BackendError carrying the example id; an
// empty response is a ContentError.
Explanation generate_explanation(ExplanationBackend& backend, const PromptTemplate& prompt,
                                 const LabeledExample& example, ExplanationCache& cache);

// One explanation per example, in input order, using up to
// descriptor.max_parallel worker threads (capped by the example count).
std::vector<Explanation> generate_for_dataset(ExplanationBackend& backend,
                                              const PromptTemplate& prompt,
                                              const std::vector<LabeledExample>& examples,
                                              ExplanationCache& cache, int max_parallel);

// Phase-1 fine-tune hyperparameters exported for an external trainer.
struct FinetuneJobSpec {
  std::string quantization = "4bit";
  std::string adapter = "LoRA";
  int batch_size = 2;
  int grad_accum_steps = 4;
  double learning_rate = 1e-4;
  int train_steps = 30;
  std::string seed_corpus_ref;
  std::string explanation_corpus_ref;

  void validate() const;
  nlohmann::json to_json() const;
  static FinetuneJobSpec from_json(const nlohmann::json& j);

  friend bool operator==(const FinetuneJobSpec&, const FinetuneJobSpec&) = default;
};

// Writes the job descriptor: {"hyperparameters": {...}, "pairs":
// [{"prompt": ..., "completion": ...}, ...]} with one pair per seed-corpus
// example, in corpus order. Explanations are matched by example id; a
// missing or surplus-free mismatch raises ConsistencyError listing the ids,
// and an empty corpus is rejected outright.
std::filesystem::path export_finetune_job(const FinetuneJobSpec& spec,
                                          const std::vector<LabeledExample>& seed_corpus,
                                          const std::vector<Explanation>& explanations,
                                          const PromptTemplate& prompt,
                                          const std::filesystem::path& out_path);

// Reads back the hyperparameters of an exported descriptor.
FinetuneJobSpec parse_finetune_job(const std::filesystem::path& path);

}  // namespace lotus
