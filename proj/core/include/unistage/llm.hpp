// Copyright 2026 The unistage Authors
// SPDX-License-Identifier: Apache-2.0

// Chat-completion backend abstraction plus the offline backends used for
// tests and reproducible runs.

#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

namespace unistage {

enum class FinishReason { complete, truncated, refused, error };

std::string_view to_string(FinishReason r);
FinishReason parse_finish_reason(std::string_view s);

struct LlmRequest {
  std::string model_tag;
  std::string prompt;
  double temperature = 0.7;
  std::uint32_t max_output_tokens = 1024;
  std::string request_id;
};

struct LlmResponse {
  std::string text;
  FinishReason finish_reason = FinishReason::complete;
  double latency_ms = 0.0;

  static LlmResponse ok(std::string text) { return {std::move(text), FinishReason::complete, 0.0}; }
  static LlmResponse truncated(std::string text) { return {std::move(text), FinishReason::truncated, 0.0}; }
  static LlmResponse refused() { return {{}, FinishReason::refused, 0.0}; }
  static LlmResponse failed() { return {{}, FinishReason::error, 0.0}; }
};

// Enforces: text is empty exactly when the response was refused or errored.
LlmResponse normalize(LlmResponse r);

class LlmBackend {
 public:
  virtual ~LlmBackend() = default;

  // Must be safe to call from several threads. Content-level failures come
  // back as a finish_reason; transport failures that outlive the backend's
  // own retries throw BackendExhausted.
  virtual LlmResponse complete(const LlmRequest& request) = 0;
  virtual std::string model_tag() const = 0;
  // Persists any recorded state (cassette recording). No-op by default.
  virtual void flush() {}
};

// Deterministic offline backend. Recognizes the built-in prompt shapes:
// question prompts get a question built from the first sentence of the text,
// answer prompts echo the reference text, judge prompts answer "equal" and
// faithfulness prompts answer "faithful".
class EchoBackend final : public LlmBackend {
 public:
  explicit EchoBackend(std::string tag = "stub-echo") : tag_(std::move(tag)) {}

  LlmResponse complete(const LlmRequest& request) override;
  std::string model_tag() const override { return tag_; }

 private:
  std::string tag_;
};

// Delegates to a user function; the function must be thread-safe if the
// backend is shared across workers.
class FunctionBackend final : public LlmBackend {
 public:
  using Fn = std::function<LlmResponse(const LlmRequest&)>;
  FunctionBackend(std::string tag, Fn fn) : tag_(std::move(tag)), fn_(std::move(fn)) {}

  LlmResponse complete(const LlmRequest& request) override { return normalize(fn_(request)); }
  std::string model_tag() const override { return tag_; }

 private:
  std::string tag_;
  Fn fn_;
};

// Returns a fixed list of responses in call order, then repeats the last one.
class SequenceBackend final : public LlmBackend {
 public:
  SequenceBackend(std::string tag, std::vector<LlmResponse> script)
      : tag_(std::move(tag)), script_(std::move(script)) {}

  LlmResponse complete(const LlmRequest& request) override;
  std::string model_tag() const override { return tag_; }
  std::size_t calls() const;

 private:
  std::string tag_;
  std::vector<LlmResponse> script_;
  mutable std::mutex mu_;
  std::size_t next_ = 0;
};

// Record/replay of request/response pairs keyed by a digest of model tag,
// prompt and request id. Repeated identical requests replay in their recorded
// order. Temperature does not participate in the key.
class CassetteBackend final : public LlmBackend {
 public:
  enum class Mode { replay, record };

  // Replay: loads `path`. Record: forwards to `inner` and writes `path` on flush().
  static std::unique_ptr<CassetteBackend> replay(const std::filesystem::path& path);
  static std::unique_ptr<CassetteBackend> record(const std::filesystem::path& path,
                                                 std::unique_ptr<LlmBackend> inner);

  LlmResponse complete(const LlmRequest& request) override;
  std::string model_tag() const override;
  void flush() override;

  static std::string request_key(const LlmRequest& request);
  std::size_t size() const;

 private:
  struct Entry {
    std::string key;
    std::size_t occurrence = 0;
    LlmRequest request;
    LlmResponse response;
  };

  CassetteBackend(Mode mode, std::filesystem::path path, std::unique_ptr<LlmBackend> inner);

  Mode mode_;
  std::filesystem::path path_;
  std::unique_ptr<LlmBackend> inner_;
  std::string tag_;
  mutable std::mutex mu_;
  std::map<std::string, std::vector<Entry>> entries_;
  std::map<std::string, std::size_t> cursor_;
};

struct HttpBackendConfig {
  std::string endpoint = "https://api.openai.com/v1/chat/completions";
  std::string api_key_env = "OPENAI_API_KEY";
  std::string model = "gpt-3.5-turbo";
  std::size_t max_retries = 5;
  std::uint32_t base_backoff_ms = 500;
  std::uint32_t requests_per_minute = 0;  // 0 disables the cap
  std::uint32_t timeout_s = 120;
};

// OpenAI-style chat-completions client. Retries transport errors, HTTP 429
// and 5xx with exponential backoff; content refusals are returned, not retried.
class HttpBackend final : public LlmBackend {
 public:
  explicit HttpBackend(HttpBackendConfig cfg);
  ~HttpBackend() override;

  LlmResponse complete(const LlmRequest& request) override;
  std::string model_tag() const override { return cfg_.model; }

  // Exposed for tests: maps a chat-completions JSON body to a response.
  static LlmResponse parse_completion(const nlohmann::json& body);

 private:
  void pace();

  HttpBackendConfig cfg_;
  std::string scheme_host_;
  std::string path_;
  std::string api_key_;
  std::mutex pace_mu_;
  std::int64_t next_slot_ms_ = 0;
};

enum class BackendKind { stub, cassette, http };

BackendKind parse_backend_kind(std::string_view s);
std::string_view to_string(BackendKind k);

struct BackendConfig {
  BackendKind kind = BackendKind::stub;
  std::string model_tag = "stub-echo";   // stub only
  std::string cassette_path;             // cassette only
  bool cassette_record = false;          // record through `record_from` instead of replaying
  BackendKind record_from = BackendKind::http;
  HttpBackendConfig http;
  std::size_t in_flight = 1;
};

std::unique_ptr<LlmBackend> make_backend(const BackendConfig& cfg);

void to_json(nlohmann::json& j, const BackendConfig& v);
void from_json(const nlohmann::json& j, BackendConfig& v);

}  // namespace unistage
