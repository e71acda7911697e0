#pragma once

// Uniform access to text-generation and embedding backends.
//
// Requests are keyed by a SHA-256 fingerprint of the rendered prompt and the
// generation settings, which is what the replay backend looks up. Replay
// files are JSON lines:
//
//   {"fingerprint": "...", "kind": "completion", "prompt": "...", "response": "..."}
//   {"fingerprint": "...", "kind": "embedding",  "prompt": "<text>", "vector": [...]}
//
// When a fingerprint occurs twice the later line wins.

#include <openssl/evp.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <semaphore>
#include <set>
#include <string>
#include <thread>
#include <vector>

#include "json.hpp"

#include "annonet/error.hpp"
#include "annonet/text.hpp"

namespace annonet {

struct GenerationConfig {
  std::string model_id = "gpt-4o-2024-08-06";
  double temperature = 0.0;
  int max_length = 4096;
  std::chrono::milliseconds timeout{60'000};
  int max_retries = 3;

  void validate() const {
    if (!(temperature >= 0.0)) throw InvalidInput("temperature must be >= 0");
    if (max_length <= 0) throw InvalidInput("max_length must be > 0");
    if (max_retries < 0) throw InvalidInput("max_retries must be >= 0");
    if (model_id.empty()) throw InvalidInput("model_id must not be empty");
  }
};

struct EmbeddingConfig {
  std::string model_id = "all-MiniLM-L6-v2";
};

inline std::string sha256_hex(std::string_view data) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(data.data(), data.size(), digest, &len, EVP_sha256(), nullptr) != 1)
    throw InternalError("SHA-256 computation failed");
  static constexpr char kHex[] = "0123456789abcdef";
  std::string out;
  out.reserve(len * 2);
  for (unsigned int i = 0; i < len; ++i) {
    out.push_back(kHex[digest[i] >> 4]);
    out.push_back(kHex[digest[i] & 0xF]);
  }
  return out;
}

/// Replay key of a completion request.
inline std::string request_fingerprint(std::string_view prompt, const GenerationConfig& cfg) {
  const nlohmann::json key = {"completion", prompt, cfg.model_id, cfg.temperature, cfg.max_length};
  return sha256_hex(key.dump());
}

/// Replay key of one embedding input.
inline std::string embedding_fingerprint(std::string_view text, const EmbeddingConfig& cfg) {
  const nlohmann::json key = {"embedding", text, cfg.model_id};
  return sha256_hex(key.dump());
}

// ---------------------------------------------------------------------------
// Replay store

struct ReplayEntry {
  enum class Kind { Completion, Embedding };

  std::string fingerprint;
  Kind kind = Kind::Completion;
  std::string prompt;
  std::string response;
  std::vector<double> vector;

  [[nodiscard]] nlohmann::ordered_json to_json() const {
    nlohmann::ordered_json j;
    j["fingerprint"] = fingerprint;
    j["kind"] = kind == Kind::Completion ? "completion" : "embedding";
    j["prompt"] = prompt;
    if (kind == Kind::Completion)
      j["response"] = response;
    else
      j["vector"] = vector;
    return j;
  }

  static ReplayEntry from_json(const nlohmann::json& j) {
    ReplayEntry e;
    e.fingerprint = j.at("fingerprint").get<std::string>();
    const auto kind = j.value("kind", "completion");
    e.prompt = j.value("prompt", "");
    if (kind == "embedding") {
      e.kind = Kind::Embedding;
      e.vector = j.at("vector").get<std::vector<double>>();
    } else if (kind == "completion") {
      e.response = j.at("response").get<std::string>();
    } else {
      throw ValidationError("unknown replay record kind '" + kind + "'");
    }
    return e;
  }
};

/// Exact-match map from fingerprint to recorded response.
class ReplayStore {
public:
  void add(ReplayEntry e) {
    auto fp = e.fingerprint;
    entries_[std::move(fp)] = std::move(e);
  }

  [[nodiscard]] const ReplayEntry* find(const std::string& fingerprint) const {
    auto it = entries_.find(fingerprint);
    return it == entries_.end() ? nullptr : &it->second;
  }

  [[nodiscard]] std::size_t size() const noexcept { return entries_.size(); }
  [[nodiscard]] const std::map<std::string, ReplayEntry>& entries() const noexcept { return entries_; }

  void add_completion(std::string_view prompt, const GenerationConfig& cfg, std::string response) {
    ReplayEntry e;
    e.fingerprint = request_fingerprint(prompt, cfg);
    e.prompt = std::string(prompt);
    e.response = std::move(response);
    add(std::move(e));
  }

  void add_embedding(std::string_view text_in, const EmbeddingConfig& cfg, std::vector<double> v) {
    ReplayEntry e;
    e.fingerprint = embedding_fingerprint(text_in, cfg);
    e.kind = ReplayEntry::Kind::Embedding;
    e.prompt = std::string(text_in);
    e.vector = std::move(v);
    add(std::move(e));
  }

  static ReplayStore load(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot read replay file " + path.string());
    ReplayStore store;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      if (text::trim(line).empty()) continue;
      try {
        store.add(ReplayEntry::from_json(nlohmann::json::parse(line)));
      } catch (const nlohmann::json::exception& e) {
        throw ValidationError(path.string() + ":" + std::to_string(lineno) + ": " + e.what());
      }
    }
    return store;
  }

  /// One line per entry, ordered by fingerprint.
  [[nodiscard]] std::string serialize() const {
    std::string out;
    for (const auto& [fp, e] : entries_) out += e.to_json().dump() + "\n";
    return out;
  }

private:
  std::map<std::string, ReplayEntry> entries_;
};

// ---------------------------------------------------------------------------
// Backends

class Backend {
public:
  virtual ~Backend() = default;
  virtual std::string complete(const std::string& prompt, const GenerationConfig& cfg) = 0;
  /// Raw (not normalized) vectors, one per input.
  virtual std::vector<std::vector<double>> embed(const std::vector<std::string>& texts,
                                                 const EmbeddingConfig& cfg) = 0;
};

class ReplayBackend final : public Backend {
public:
  explicit ReplayBackend(std::shared_ptr<const ReplayStore> store) : store_(std::move(store)) {}

  std::string complete(const std::string& prompt, const GenerationConfig& cfg) override {
    const auto fp = request_fingerprint(prompt, cfg);
    const auto* e = store_->find(fp);
    if (e == nullptr || e->kind != ReplayEntry::Kind::Completion) throw ReplayMiss(fp);
    return e->response;
  }

  std::vector<std::vector<double>> embed(const std::vector<std::string>& texts, const EmbeddingConfig& cfg) override {
    std::vector<std::vector<double>> out;
    out.reserve(texts.size());
    for (const auto& t : texts) {
      const auto fp = embedding_fingerprint(t, cfg);
      const auto* e = store_->find(fp);
      if (e == nullptr || e->kind != ReplayEntry::Kind::Embedding) throw ReplayMiss(fp);
      out.push_back(e->vector);
    }
    return out;
  }

private:
  std::shared_ptr<const ReplayStore> store_;
};

/// Forwards to an inner backend and appends every request/response pair to a
/// replay file. Write failures are collected as warnings; calls still succeed.
class RecordingBackend final : public Backend {
public:
  RecordingBackend(Backend& inner, std::filesystem::path path) : inner_(inner), path_(std::move(path)) {}

  std::string complete(const std::string& prompt, const GenerationConfig& cfg) override {
    auto response = inner_.complete(prompt, cfg);
    ReplayEntry e;
    e.fingerprint = request_fingerprint(prompt, cfg);
    e.prompt = prompt;
    e.response = response;
    append(e);
    return response;
  }

  std::vector<std::vector<double>> embed(const std::vector<std::string>& texts, const EmbeddingConfig& cfg) override {
    auto vectors = inner_.embed(texts, cfg);
    for (std::size_t i = 0; i < texts.size() && i < vectors.size(); ++i) {
      ReplayEntry e;
      e.kind = ReplayEntry::Kind::Embedding;
      e.fingerprint = embedding_fingerprint(texts[i], cfg);
      e.prompt = texts[i];
      e.vector = vectors[i];
      append(e);
    }
    return vectors;
  }

  [[nodiscard]] std::size_t records_written() const {
    std::lock_guard lock(mutex_);
    return written_;
  }

  [[nodiscard]] std::vector<std::string> warnings() const {
    std::lock_guard lock(mutex_);
    return warnings_;
  }

private:
  void append(const ReplayEntry& e) {
    std::lock_guard lock(mutex_);
    std::ofstream out(path_, std::ios::binary | std::ios::app);
    if (out) out << e.to_json().dump() << '\n';
    if (!out) {
      warnings_.push_back("failed to write replay record to " + path_.string());
      return;
    }
    ++written_;
  }

  Backend& inner_;
  std::filesystem::path path_;
  mutable std::mutex mutex_;
  std::size_t written_ = 0;
  std::vector<std::string> warnings_;
};

// ---------------------------------------------------------------------------
// Retry policy

struct RetryPolicy {
  int max_retries = 3;
  std::chrono::milliseconds base_delay{500};
  std::chrono::milliseconds max_delay{30'000};

  /// Delay before retry number `attempt` (1-based): base * 2^(attempt-1),
  /// capped at max_delay. Non-decreasing in `attempt`.
  [[nodiscard]] std::chrono::milliseconds delay(int attempt) const {
    double ms = static_cast<double>(base_delay.count()) * std::pow(2.0, attempt - 1);
    ms = std::min(ms, static_cast<double>(max_delay.count()));
    return std::chrono::milliseconds(static_cast<long long>(ms));
  }
};

using Sleeper = std::function<void(std::chrono::milliseconds)>;

inline Sleeper real_sleeper() {
  return [](std::chrono::milliseconds d) { std::this_thread::sleep_for(d); };
}

/// Rate limiting and server-side failures are worth retrying.
inline bool is_retryable_status(int status) noexcept { return status == 408 || status == 429 || status >= 500; }

/// Runs `call`, retrying on TransportError and retryable BackendError up to
/// policy.max_retries times. Throws TransportError once retries are spent;
/// non-retryable statuses propagate immediately.
template <typename Call>
auto with_retries(Call&& call, const RetryPolicy& policy, const Sleeper& sleep) -> decltype(call()) {
  for (int attempt = 0;; ++attempt) {
    std::string failure;
    try {
      return call();
    } catch (const BackendError& e) {
      if (!is_retryable_status(e.status())) throw;
      failure = e.what();
    } catch (const TransportError& e) {
      failure = e.what();
    }
    if (attempt >= policy.max_retries)
      throw TransportError("giving up after " + std::to_string(attempt + 1) + " attempts: " + failure);
    sleep(policy.delay(attempt + 1));
  }
}

// ---------------------------------------------------------------------------
// Gateway

/// Front door used by the pipeline and the topic builder. Validates inputs,
/// bounds in-flight requests, L2-normalizes embeddings, and remembers every
/// fingerprint it served (for run manifests).
class Gateway {
public:
  static constexpr std::ptrdiff_t kMaxInFlight = 64;

  explicit Gateway(Backend& backend, int max_in_flight = 4, EmbeddingConfig embedding = {})
      : backend_(backend), embedding_(std::move(embedding)), slots_(std::clamp<std::ptrdiff_t>(max_in_flight, 1, kMaxInFlight)) {}

  std::string complete(const std::string& prompt, const GenerationConfig& cfg) {
    if (text::trim(prompt).empty()) throw InvalidInput("complete: empty prompt");
    cfg.validate();
    note(request_fingerprint(prompt, cfg));
    Slot slot(slots_);
    return backend_.complete(prompt, cfg);
  }

  /// One unit vector per input; mixed dimensions and zero vectors are errors.
  std::vector<std::vector<double>> embed(const std::vector<std::string>& texts) {
    if (texts.empty()) return {};
    for (const auto& t : texts) {
      if (text::trim(t).empty()) throw InvalidInput("embed: empty text");
      note(embedding_fingerprint(t, embedding_));
    }
    std::vector<std::vector<double>> raw;
    {
      Slot slot(slots_);
      raw = backend_.embed(texts, embedding_);
    }
    if (raw.size() != texts.size()) throw InternalError("embedding backend returned a wrong number of vectors");
    for (auto& v : raw) {
      if (v.empty() || v.size() != raw.front().size()) throw InvalidInput("embedding dimensions differ");
      double norm = 0.0;
      for (double x : v) norm += x * x;
      norm = std::sqrt(norm);
      if (!(norm > 0.0) || !std::isfinite(norm)) throw InvalidInput("cannot normalize a zero embedding vector");
      for (double& x : v) x /= norm;
    }
    return raw;
  }

  [[nodiscard]] const EmbeddingConfig& embedding_config() const noexcept { return embedding_; }

  /// Sorted fingerprints of every request made through this gateway.
  [[nodiscard]] std::vector<std::string> fingerprints() const {
    std::lock_guard lock(mutex_);
    return {seen_.begin(), seen_.end()};
  }

private:
  struct Slot {
    explicit Slot(std::counting_semaphore<kMaxInFlight>& s) : sem(s) { sem.acquire(); }
    ~Slot() { sem.release(); }
    Slot(const Slot&) = delete;
    Slot& operator=(const Slot&) = delete;
    std::counting_semaphore<kMaxInFlight>& sem;
  };

  void note(std::string fp) {
    std::lock_guard lock(mutex_);
    seen_.insert(std::move(fp));
  }

  Backend& backend_;
  EmbeddingConfig embedding_;
  std::counting_semaphore<kMaxInFlight> slots_;
  mutable std::mutex mutex_;
  std::set<std::string> seen_;
};

}  // namespace annonet
