#include "lotus/explainer.hpp"

#include <fcntl.h>
#include <poll.h>
#include <signal.h>
#include <sys/wait.h>
#include <unistd.h>

#include <chrono>
#include <cstring>
#include <fstream>
#include <thread>

#include "lotus/errors.hpp"
#include "lotus/hash.hpp"

#include <httplib.h>

namespace lotus {

namespace {

constexpr std::string_view kCanonicalInstruction =
    "Read the given text and generate a short explanation of the emotional or "
    "situational context behind the sentence. The explanation should be concise and "
    "relevant to the sentence. Do not explicitly mention emotions but focus on the "
    "implications behind the sentence.";

constexpr std::string_view kCanonicalLayout = "text-block/v1";

char to_lower_ascii(unsigned char c) {
  return (c >= 'A' && c <= 'Z') ? static_cast<char>(c - 'A' + 'a')
                                : static_cast<char>(c);
}

std::string lowercase_ascii(const std::string& s) {
  std::string out;
  out.reserve(s.size());
  for (unsigned char c : s) out.push_back(to_lower_ascii(c));
  return out;
}

bool is_space(unsigned char c) {
  return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v';
}

// Collapses every whitespace run that contains a line break into a single
// space and trims the ends: explanations are single-paragraph by contract.
std::string normalize_paragraph(const std::string& raw) {
  std::string out;
  out.reserve(raw.size());
  std::size_t i = 0;
  while (i < raw.size()) {
    if (is_space(static_cast<unsigned char>(raw[i]))) {
      std::size_t j = i;
      bool has_newline = false;
      while (j < raw.size() && is_space(static_cast<unsigned char>(raw[j]))) {
        has_newline = has_newline || raw[j] == '\n' || raw[j] == '\r';
        ++j;
      }
      if (has_newline) {
        out.push_back(' ');
      } else {
        out.append(raw, i, j - i);
      }
      i = j;
    } else {
      out.push_back(raw[i]);
      ++i;
    }
  }
  std::size_t begin = 0;
  while (begin < out.size() && is_space(static_cast<unsigned char>(out[begin]))) ++begin;
  std::size_t end = out.size();
  while (end > begin && is_space(static_cast<unsigned char>(out[end - 1]))) --end;
  return out.substr(begin, end - begin);
}

std::string utc_now_iso8601() {
  const auto now = std::chrono::system_clock::now();
  const std::time_t t = std::chrono::system_clock::to_time_t(now);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buffer[32];
  std::strftime(buffer, sizeof(buffer), "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buffer;
}

}  // namespace

const PromptTemplate& PromptTemplate::canonical() {
  static const PromptTemplate instance{
      "v1", std::string(kCanonicalInstruction), std::string(kCanonicalLayout)};
  return instance;
}

const PromptTemplate& PromptTemplate::for_version(const std::string& version) {
  if (version == "v1") return canonical();
  throw ValidationError("unknown prompt template version '" + version + "'");
}

void PromptTemplate::validate() const {
  if (version.empty()) {
    throw ValidationError("prompt template version must be non-empty");
  }
  if (version == canonical().version &&
      (instruction != canonical().instruction || layout != canonical().layout)) {
    throw ValidationError(
        "prompt template 'v1' was modified without bumping the version; "
        "cache keys depend on the version, so any change to the instruction "
        "or layout needs a new one");
  }
}

std::string build_prompt(const PromptTemplate& prompt, const std::string& text) {
  prompt.validate();
  if (text.empty()) {
    throw ArgumentError("build_prompt requires non-empty text");
  }
  std::string out;
  out.reserve(prompt.instruction.size() + text.size() + 24);
  out += prompt.instruction;
  out += "\n\nText: ";
  out += text;
  out += "\nExplanation:";
  return out;
}

nlohmann::json Explanation::to_json() const {
  return nlohmann::json{{"example_id", example_id},
                        {"text", text},
                        {"backend_id", backend_id},
                        {"prompt_version", prompt_version}};
}

std::string stub_explain(const std::string& text, const CueMap& cue_map) {
  const std::string haystack = lowercase_ascii(text);
  std::string clauses;
  for (const auto& [keyword, clause] : cue_map) {
    if (haystack.find(lowercase_ascii(keyword)) != std::string::npos) {
      if (!clauses.empty()) clauses += " and ";
      clauses += clause;
    }
  }
  if (clauses.empty()) clauses = "describes a situation";
  return "The speaker " + clauses + ".";
}

const CueMap& default_cue_map() {
  static const CueMap instance = {
      {"angry", "expresses irritation or hostility"},
      {"furious", "conveys an intense confrontation"},
      {"warpath", "conveys tension or confrontation"},
      {"afraid", "hints at a perceived threat"},
      {"scared", "hints at a perceived threat"},
      {"panic", "describes mounting alarm"},
      {"happy", "recounts a welcome turn of events"},
      {"glad", "recounts a welcome turn of events"},
      {"celebrate", "marks an occasion worth sharing"},
      {"sad", "dwells on a loss or setback"},
      {"cry", "dwells on a loss or setback"},
      {"miss", "reflects on an absence"},
      {"suddenly", "relates an unexpected turn"},
      {"shock", "relates an unexpected turn"},
      {"believe", "reacts to something hard to take in"},
  };
  return instance;
}

std::string to_string(BackendKind kind) {
  switch (kind) {
    case BackendKind::stub: return "stub";
    case BackendKind::external_command: return "external-command";
    case BackendKind::external_http: return "external-http";
  }
  throw ArgumentError("invalid backend kind");
}

BackendKind backend_kind_from_string(const std::string& s) {
  if (s == "stub") return BackendKind::stub;
  if (s == "external-command") return BackendKind::external_command;
  if (s == "external-http") return BackendKind::external_http;
  throw ValidationError("backend kind must be stub, external-command or external-http; got '" +
                        s + "'");
}

void BackendDescriptor::validate() const {
  if (backend_id.empty()) throw ValidationError("backend_id must be non-empty");
  if (!(timeout_seconds > 0.0)) throw ValidationError("backend timeout must be > 0");
  if (max_parallel < 1) throw ValidationError("backend max_parallel must be >= 1");
  if (kind == BackendKind::external_command && command.empty()) {
    throw ValidationError("external-command backend needs a command line");
  }
  if (kind == BackendKind::external_http && endpoint.empty()) {
    throw ValidationError("external-http backend needs an endpoint URL");
  }
}

nlohmann::json BackendDescriptor::to_json() const {
  nlohmann::json cues = nlohmann::json::array();
  for (const auto& [keyword, clause] : cue_map) {
    cues.push_back(nlohmann::json::array({keyword, clause}));
  }
  return nlohmann::json{{"backend_id", backend_id}, {"kind", to_string(kind)},
                        {"endpoint", endpoint},     {"command", command},
                        {"timeout_seconds", timeout_seconds},
                        {"max_parallel", max_parallel},
                        {"cue_map", cues}};
}

BackendDescriptor BackendDescriptor::from_json(const nlohmann::json& j) {
  BackendDescriptor d;
  d.backend_id = j.value("backend_id", d.backend_id);
  if (j.contains("kind")) d.kind = backend_kind_from_string(j.at("kind").get<std::string>());
  d.endpoint = j.value("endpoint", d.endpoint);
  d.command = j.value("command", d.command);
  d.timeout_seconds = j.value("timeout_seconds", d.timeout_seconds);
  d.max_parallel = j.value("max_parallel", d.max_parallel);
  if (j.contains("cue_map")) {
    for (const auto& pair : j.at("cue_map")) {
      if (!pair.is_array() || pair.size() != 2) {
        throw ValidationError("cue_map entries must be [keyword, clause] pairs");
      }
      d.cue_map.emplace_back(pair[0].get<std::string>(), pair[1].get<std::string>());
    }
  }
  d.validate();
  return d;
}

namespace {

class StubBackend final : public ExplanationBackend {
 public:
  StubBackend(std::string id, CueMap cue_map)
      : id_(std::move(id)), cue_map_(std::move(cue_map)) {}

  const std::string& id() const override { return id_; }

 protected:
  std::string do_explain(const ExplainRequest& request) override {
    return stub_explain(request.text, cue_map_);
  }

 private:
  std::string id_;
  CueMap cue_map_;
};

// Writes the prompt to the command's stdin and reads the explanation from
// its stdout; both through non-blocking pipes under one deadline so a
// stalled child cannot hang the pipeline.
class CommandBackend final : public ExplanationBackend {
 public:
  CommandBackend(std::string id, std::string command, double timeout_seconds)
      : id_(std::move(id)), command_(std::move(command)), timeout_(timeout_seconds) {
    // A child that exits before draining stdin must surface as EPIPE on
    // write, not kill the process.
    static std::once_flag once;
    std::call_once(once, [] { ::signal(SIGPIPE, SIG_IGN); });
  }

  const std::string& id() const override { return id_; }

 protected:
  std::string do_explain(const ExplainRequest& request) override {
    int stdin_pipe[2];
    int stdout_pipe[2];
    if (::pipe(stdin_pipe) != 0) {
      throw BackendError("backend pipe() failed: " + std::string(std::strerror(errno)),
                         request.example_id);
    }
    if (::pipe(stdout_pipe) != 0) {
      ::close(stdin_pipe[0]);
      ::close(stdin_pipe[1]);
      throw BackendError("backend pipe() failed: " + std::string(std::strerror(errno)),
                         request.example_id);
    }

    const pid_t pid = ::fork();
    if (pid < 0) {
      for (int fd : {stdin_pipe[0], stdin_pipe[1], stdout_pipe[0], stdout_pipe[1]}) {
        ::close(fd);
      }
      throw BackendError("backend fork() failed: " + std::string(std::strerror(errno)),
                         request.example_id);
    }
    if (pid == 0) {
      // Own process group so a timeout can take out the whole command tree,
      // not just the shell.
      ::setpgid(0, 0);
      ::dup2(stdin_pipe[0], STDIN_FILENO);
      ::dup2(stdout_pipe[1], STDOUT_FILENO);
      for (int fd : {stdin_pipe[0], stdin_pipe[1], stdout_pipe[0], stdout_pipe[1]}) {
        ::close(fd);
      }
      ::execl("/bin/sh", "sh", "-c", command_.c_str(), static_cast<char*>(nullptr));
      ::_exit(127);
    }

    // Both sides set the group so the kill below can never race the child's
    // own setpgid.
    ::setpgid(pid, pid);
    ::close(stdin_pipe[0]);
    ::close(stdout_pipe[1]);
    int write_fd = stdin_pipe[1];
    int read_fd = stdout_pipe[0];
    ::fcntl(write_fd, F_SETFL, O_NONBLOCK);
    ::fcntl(read_fd, F_SETFL, O_NONBLOCK);

    const auto deadline = std::chrono::steady_clock::now() +
                          std::chrono::duration_cast<std::chrono::steady_clock::duration>(
                              std::chrono::duration<double>(timeout_));
    std::string output;
    std::size_t written = 0;
    bool failed_timeout = false;

    auto cleanup = [&](bool kill_child) {
      if (write_fd >= 0) ::close(write_fd);
      if (read_fd >= 0) ::close(read_fd);
      if (kill_child) {
        ::kill(-pid, SIGKILL);
        ::kill(pid, SIGKILL);
      }
    };

    while (read_fd >= 0) {
      const auto now = std::chrono::steady_clock::now();
      if (now >= deadline) {
        failed_timeout = true;
        break;
      }
      const auto remaining =
          std::chrono::duration_cast<std::chrono::milliseconds>(deadline - now);
      struct pollfd fds[2];
      nfds_t nfds = 0;
      int read_slot = -1;
      int write_slot = -1;
      if (read_fd >= 0) {
        read_slot = static_cast<int>(nfds);
        fds[nfds++] = {read_fd, POLLIN, 0};
      }
      if (write_fd >= 0) {
        write_slot = static_cast<int>(nfds);
        fds[nfds++] = {write_fd, POLLOUT, 0};
      }
      const int rc = ::poll(fds, nfds, static_cast<int>(std::max<long long>(
                                           1, remaining.count())));
      if (rc < 0) {
        if (errno == EINTR) continue;
        cleanup(true);
        ::waitpid(pid, nullptr, 0);
        throw BackendError("backend poll() failed: " + std::string(std::strerror(errno)),
                           request.example_id);
      }
      if (rc == 0) continue;  // loop re-checks the deadline

      if (write_slot >= 0 && (fds[write_slot].revents & (POLLOUT | POLLERR | POLLHUP))) {
        if (written < request.prompt.size() && (fds[write_slot].revents & POLLOUT)) {
          const ssize_t n = ::write(write_fd, request.prompt.data() + written,
                                    request.prompt.size() - written);
          if (n > 0) {
            written += static_cast<std::size_t>(n);
          } else if (n < 0 && errno != EAGAIN && errno != EINTR) {
            // Child closed stdin early; stop feeding it.
            ::close(write_fd);
            write_fd = -1;
          }
        } else if (fds[write_slot].revents & (POLLERR | POLLHUP)) {
          ::close(write_fd);
          write_fd = -1;
        }
        if (write_fd >= 0 && written == request.prompt.size()) {
          ::close(write_fd);
          write_fd = -1;
        }
      }

      if (read_slot >= 0 && (fds[read_slot].revents & (POLLIN | POLLHUP | POLLERR))) {
        char buffer[4096];
        const ssize_t n = ::read(read_fd, buffer, sizeof(buffer));
        if (n > 0) {
          output.append(buffer, static_cast<std::size_t>(n));
        } else if (n == 0) {
          ::close(read_fd);
          read_fd = -1;
        } else if (errno != EAGAIN && errno != EINTR) {
          ::close(read_fd);
          read_fd = -1;
        }
      }
    }

    if (failed_timeout) {
      cleanup(true);
      ::waitpid(pid, nullptr, 0);
      throw BackendError("backend command timed out after " + std::to_string(timeout_) +
                             "s: " + command_,
                         request.example_id);
    }
    cleanup(false);

    int status = 0;
    while (std::chrono::steady_clock::now() < deadline) {
      const pid_t done = ::waitpid(pid, &status, WNOHANG);
      if (done == pid) {
        if (WIFEXITED(status) && WEXITSTATUS(status) == 0) {
          return output;
        }
        const int code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
        throw BackendError("backend command exited with status " + std::to_string(code) +
                               ": " + command_,
                           request.example_id);
      }
      std::this_thread::sleep_for(std::chrono::milliseconds(1));
    }
    ::kill(-pid, SIGKILL);
    ::kill(pid, SIGKILL);
    ::waitpid(pid, nullptr, 0);
    throw BackendError("backend command timed out after " + std::to_string(timeout_) +
                           "s: " + command_,
                       request.example_id);
  }

 private:
  std::string id_;
  std::string command_;
  double timeout_;
};

class HttpBackend final : public ExplanationBackend {
 public:
  HttpBackend(std::string id, const std::string& endpoint, double timeout_seconds)
      : id_(std::move(id)), timeout_(timeout_seconds) {
    const auto scheme_end = endpoint.find("://");
    if (scheme_end == std::string::npos) {
      throw ValidationError("endpoint must look like http://host:port/path, got '" +
                            endpoint + "'");
    }
    const auto path_start = endpoint.find('/', scheme_end + 3);
    if (path_start == std::string::npos) {
      base_ = endpoint;
      path_ = "/";
    } else {
      base_ = endpoint.substr(0, path_start);
      path_ = endpoint.substr(path_start);
    }
  }

  const std::string& id() const override { return id_; }

 protected:
  std::string do_explain(const ExplainRequest& request) override {
    httplib::Client client(base_);
    const auto seconds = static_cast<time_t>(timeout_);
    const auto usec = static_cast<time_t>((timeout_ - static_cast<double>(seconds)) * 1e6);
    client.set_connection_timeout(seconds, usec);
    client.set_read_timeout(seconds, usec);
    client.set_write_timeout(seconds, usec);

    const std::string body = nlohmann::json{{"prompt", request.prompt}}.dump();
    auto res = client.Post(path_, body, "application/json");
    if (!res) {
      throw BackendError("backend HTTP request failed: " + httplib::to_string(res.error()),
                         request.example_id);
    }
    if (res->status != 200) {
      throw BackendError("backend HTTP status " + std::to_string(res->status) + " from " +
                             base_ + path_,
                         request.example_id);
    }
    nlohmann::json parsed;
    try {
      parsed = nlohmann::json::parse(res->body);
    } catch (const nlohmann::json::exception&) {
      throw BackendError("backend returned malformed JSON", request.example_id);
    }
    if (!parsed.contains("explanation") || !parsed["explanation"].is_string()) {
      throw BackendError("backend response is missing the 'explanation' field",
                         request.example_id);
    }
    return parsed["explanation"].get<std::string>();
  }

 private:
  std::string id_;
  std::string base_;
  std::string path_;
  double timeout_;
};

}  // namespace

std::unique_ptr<ExplanationBackend> make_backend(const BackendDescriptor& descriptor) {
  descriptor.validate();
  switch (descriptor.kind) {
    case BackendKind::stub:
      return std::make_unique<StubBackend>(
          descriptor.backend_id,
          descriptor.cue_map.empty() ? default_cue_map() : descriptor.cue_map);
    case BackendKind::external_command:
      return std::make_unique<CommandBackend>(descriptor.backend_id, descriptor.command,
                                              descriptor.timeout_seconds);
    case BackendKind::external_http:
      return std::make_unique<HttpBackend>(descriptor.backend_id, descriptor.endpoint,
                                           descriptor.timeout_seconds);
  }
  throw ArgumentError("invalid backend kind");
}

nlohmann::json CacheEntry::to_json() const {
  return nlohmann::json{{"key", key},
                        {"example_id", example_id},
                        {"input_text", input_text},
                        {"explanation_text", explanation_text},
                        {"backend_id", backend_id},
                        {"prompt_version", prompt_version},
                        {"created_at", created_at}};
}

CacheEntry CacheEntry::from_json(const nlohmann::json& j) {
  CacheEntry entry;
  entry.key = j.at("key").get<std::string>();
  entry.example_id = j.at("example_id").get<std::string>();
  entry.input_text = j.at("input_text").get<std::string>();
  entry.explanation_text = j.at("explanation_text").get<std::string>();
  entry.backend_id = j.at("backend_id").get<std::string>();
  entry.prompt_version = j.at("prompt_version").get<std::string>();
  entry.created_at = j.value("created_at", "");
  return entry;
}

ExplanationCache::ExplanationCache(std::filesystem::path file) : file_(std::move(file)) {
  std::ifstream in(file_, std::ios::binary);
  if (!in) return;  // created on first put
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    nlohmann::json j = nlohmann::json::parse(line, nullptr, false);
    if (j.is_discarded()) {
      // A torn final line is what a crash mid-append leaves behind; anything
      // earlier means real corruption.
      if (in.peek() == EOF) break;
      throw ValidationError("corrupt cache line " + std::to_string(line_no) + " in " +
                            file_.string());
    }
    try {
      CacheEntry entry = CacheEntry::from_json(j);
      entries_[entry.key] = std::move(entry);
    } catch (const nlohmann::json::exception&) {
      throw ValidationError("cache line " + std::to_string(line_no) + " in " +
                            file_.string() + " is missing required fields");
    }
  }
}

std::string ExplanationCache::make_key(const std::string& prompt_version,
                                       const std::string& input_text) {
  std::string material;
  material.reserve(prompt_version.size() + 1 + input_text.size());
  material += prompt_version;
  material.push_back('\x1f');
  material += input_text;
  return to_hex16(fnv1a64(material));
}

std::optional<CacheEntry> ExplanationCache::lookup(const std::string& key) const {
  std::lock_guard lock(mutex_);
  auto it = entries_.find(key);
  if (it == entries_.end()) return std::nullopt;
  return it->second;
}

void ExplanationCache::put(const CacheEntry& entry) {
  std::lock_guard lock(mutex_);
  entries_[entry.key] = entry;
  if (file_.empty()) return;
  if (file_.has_parent_path()) {
    std::filesystem::create_directories(file_.parent_path());
  }
  std::ofstream out(file_, std::ios::binary | std::ios::app);
  if (!out) throw IoError("cannot append to cache file: " + file_.string());
  out << entry.to_json().dump() << '\n';
  out.flush();
  if (!out) throw IoError("failed writing cache file: " + file_.string());
}

std::size_t ExplanationCache::size() const {
  std::lock_guard lock(mutex_);
  return entries_.size();
}

Explanation generate_explanation(ExplanationBackend& backend, const PromptTemplate& prompt,
                                 const LabeledExample& example, ExplanationCache& cache) {
  prompt.validate();
  const std::string key = ExplanationCache::make_key(prompt.version, example.text);
  if (auto hit = cache.lookup(key)) {
    return Explanation{example.id, hit->explanation_text, hit->backend_id,
                       hit->prompt_version};
  }

  ExplainRequest request{example.id, example.text, build_prompt(prompt, example.text)};
  const std::string raw = backend.explain(request);
  const std::string text = normalize_paragraph(raw);
  if (text.empty()) {
    throw ContentError("backend '" + backend.id() + "' returned an empty explanation for example '" +
                       example.id + "'");
  }

  CacheEntry entry{key,           example.id,     example.text, text,
                   backend.id(),  prompt.version, utc_now_iso8601()};
  cache.put(entry);
  return Explanation{example.id, text, backend.id(), prompt.version};
}

std::vector<Explanation> generate_for_dataset(ExplanationBackend& backend,
                                              const PromptTemplate& prompt,
                                              const std::vector<LabeledExample>& examples,
                                              ExplanationCache& cache, int max_parallel) {
  if (max_parallel < 1) throw ArgumentError("max_parallel must be >= 1");
  std::vector<Explanation> results(examples.size());
  if (examples.empty()) return results;

  const std::size_t workers =
      std::min<std::size_t>(static_cast<std::size_t>(max_parallel), examples.size());
  if (workers == 1) {
    for (std::size_t i = 0; i < examples.size(); ++i) {
      results[i] = generate_explanation(backend, prompt, examples[i], cache);
    }
    return results;
  }

  std::atomic<std::size_t> next{0};
  std::atomic<bool> failed{false};
  std::mutex error_mutex;
  std::exception_ptr first_error;

  auto worker = [&] {
    while (!failed.load(std::memory_order_relaxed)) {
      const std::size_t i = next.fetch_add(1, std::memory_order_relaxed);
      if (i >= examples.size()) return;
      try {
        results[i] = generate_explanation(backend, prompt, examples[i], cache);
      } catch (...) {
        std::lock_guard lock(error_mutex);
        if (!first_error) first_error = std::current_exception();
        failed.store(true, std::memory_order_relaxed);
        return;
      }
    }
  };

  std::vector<std::thread> threads;
  threads.reserve(workers);
  for (std::size_t w = 0; w < workers; ++w) threads.emplace_back(worker);
  for (auto& t : threads) t.join();
  if (first_error) std::rethrow_exception(first_error);
  return results;
}

void FinetuneJobSpec::validate() const {
  if (quantization.empty()) throw ValidationError("quantization must be non-empty");
  if (adapter.empty()) throw ValidationError("adapter must be non-empty");
  if (batch_size <= 0) throw ValidationError("batch_size must be positive");
  if (grad_accum_steps <= 0) throw ValidationError("grad_accum_steps must be positive");
  if (!(learning_rate > 0.0)) throw ValidationError("learning_rate must be positive");
  if (train_steps <= 0) throw ValidationError("train_steps must be positive");
}

nlohmann::json FinetuneJobSpec::to_json() const {
  return nlohmann::json{{"quantization", quantization},
                        {"adapter", adapter},
                        {"batch_size", batch_size},
                        {"grad_accum_steps", grad_accum_steps},
                        {"learning_rate", learning_rate},
                        {"train_steps", train_steps},
                        {"seed_corpus_ref", seed_corpus_ref},
                        {"explanation_corpus_ref", explanation_corpus_ref}};
}

FinetuneJobSpec FinetuneJobSpec::from_json(const nlohmann::json& j) try {
  FinetuneJobSpec spec;
  spec.quantization = j.value("quantization", spec.quantization);
  spec.adapter = j.value("adapter", spec.adapter);
  spec.batch_size = j.value("batch_size", spec.batch_size);
  spec.grad_accum_steps = j.value("grad_accum_steps", spec.grad_accum_steps);
  spec.learning_rate = j.value("learning_rate", spec.learning_rate);
  spec.train_steps = j.value("train_steps", spec.train_steps);
  spec.seed_corpus_ref = j.value("seed_corpus_ref", spec.seed_corpus_ref);
  spec.explanation_corpus_ref = j.value("explanation_corpus_ref", spec.explanation_corpus_ref);
  spec.validate();
  return spec;
} catch (const nlohmann::json::exception& e) {
  throw ValidationError(std::string("fine-tune job spec: ") + e.what());
}

std::filesystem::path export_finetune_job(const FinetuneJobSpec& spec,
                                          const std::vector<LabeledExample>& seed_corpus,
                                          const std::vector<Explanation>& explanations,
                                          const PromptTemplate& prompt,
                                          const std::filesystem::path& out_path) {
  spec.validate();
  prompt.validate();
  if (seed_corpus.empty()) {
    throw ConsistencyError("seed corpus is empty; fine-tuning needs (prompt, explanation) pairs");
  }

  std::unordered_map<std::string, const Explanation*> by_id;
  by_id.reserve(explanations.size());
  for (const auto& explanation : explanations) {
    if (!by_id.emplace(explanation.example_id, &explanation).second) {
      throw ConsistencyError("duplicate explanation for example '" +
                             explanation.example_id + "'");
    }
  }

  std::string missing;
  nlohmann::json pairs = nlohmann::json::array();
  for (const auto& example : seed_corpus) {
    auto it = by_id.find(example.id);
    if (it == by_id.end()) {
      if (!missing.empty()) missing += ", ";
      missing += example.id;
      continue;
    }
    pairs.push_back(nlohmann::json{{"prompt", build_prompt(prompt, example.text)},
                                   {"completion", it->second->text}});
  }
  if (!missing.empty()) {
    throw ConsistencyError("missing explanations for seed examples: " + missing);
  }

  nlohmann::json job{{"hyperparameters", spec.to_json()}, {"pairs", pairs}};
  std::ofstream out(out_path, std::ios::binary);
  if (!out) throw IoError("cannot open job descriptor for writing: " + out_path.string());
  out << job.dump(2) << '\n';
  if (!out) throw IoError("failed writing job descriptor: " + out_path.string());
  return out_path;
}

FinetuneJobSpec parse_finetune_job(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open job descriptor: " + path.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError("job descriptor is not valid JSON: " + std::string(e.what()));
  }
  if (!j.contains("hyperparameters")) {
    throw ValidationError("job descriptor is missing 'hyperparameters'");
  }
  return FinetuneJobSpec::from_json(j.at("hyperparameters"));
}

}  // namespace lotus
