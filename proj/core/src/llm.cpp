// Copyright 2026 The unistage Authors
// SPDX-License-Identifier: Apache-2.0

#define CPPHTTPLIB_OPENSSL_SUPPORT
#include "unistage/llm.hpp"

#include <httplib.h>

#include <algorithm>
#include <chrono>
#include <cstdlib>
#include <thread>

#include "unistage/digest.hpp"
#include "unistage/error.hpp"
#include "unistage/jsonl.hpp"
#include "unistage/text.hpp"

namespace unistage {

std::string_view to_string(FinishReason r) {
  switch (r) {
    case FinishReason::complete: return "complete";
    case FinishReason::truncated: return "truncated";
    case FinishReason::refused: return "refused";
    case FinishReason::error: return "error";
  }
  return "error";
}

FinishReason parse_finish_reason(std::string_view s) {
  if (s == "complete") return FinishReason::complete;
  if (s == "truncated") return FinishReason::truncated;
  if (s == "refused") return FinishReason::refused;
  if (s == "error") return FinishReason::error;
  throw ValidationError("unknown finish_reason '" + std::string(s) + "'");
}

LlmResponse normalize(LlmResponse r) {
  if (r.finish_reason == FinishReason::refused || r.finish_reason == FinishReason::error) {
    r.text.clear();
  } else if (r.text.empty()) {
    r.finish_reason = FinishReason::refused;
  }
  return r;
}

namespace {

std::string_view between(std::string_view s, std::string_view open, std::string_view close) {
  const auto a = s.find(open);
  if (a == std::string_view::npos) return {};
  const auto from = a + open.size();
  const auto b = s.find(close, from);
  return s.substr(from, b == std::string_view::npos ? std::string_view::npos : b - from);
}

std::string trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(first, last - first + 1));
}

// Cuts at a code-point boundary no later than `max_bytes`.
std::string clip(std::string_view s, std::size_t max_bytes) {
  if (s.size() <= max_bytes) return std::string(s);
  std::size_t cut = max_bytes;
  while (cut > 0 && (static_cast<unsigned char>(s[cut]) & 0xC0) == 0x80) --cut;
  return std::string(s.substr(0, cut));
}

std::size_t count_substr(std::string_view hay, std::string_view needle) {
  std::size_t n = 0;
  for (auto p = hay.find(needle); p != std::string_view::npos; p = hay.find(needle, p + needle.size())) ++n;
  return n;
}

}  // namespace

LlmResponse EchoBackend::complete(const LlmRequest& request) {
  const std::string_view prompt = request.prompt;
  if (prompt.find("<reference text>: ") != std::string_view::npos) {
    return normalize(LlmResponse::ok(trim(between(prompt, "<reference text>: ", "\n\n<reply>:"))));
  }
  if (prompt.find("<text>: ") != std::string_view::npos) {
    const auto text = between(prompt, "<text>: ", "\n\n<question>:");
    const RuleSentenceSplitter splitter;
    const auto spans = splitter.split(text);
    const auto first = spans.empty() ? std::string(text) : trim(text.substr(spans[0].start, spans[0].size()));
    return normalize(LlmResponse::ok("Please explain the following: " + clip(first, 240)));
  }
  if (prompt.find("`faithful` or `deviated`") != std::string_view::npos) {
    return LlmResponse::ok("faithful");
  }
  if (prompt.find("[System]") != std::string_view::npos &&
      prompt.find("Assistant 1 is equal to Assistant 2") != std::string_view::npos) {
    return LlmResponse::ok("Assistant 1 is equal to Assistant 2");
  }
  if (prompt.find("你是一名患者") != std::string_view::npos) {
    const auto asked = count_substr(prompt, "医生：");
    return LlmResponse::ok("医生，请问我的情况还需要注意什么？（第" + std::to_string(asked + 1) + "问）");
  }
  auto last_nl = trim(prompt).rfind('\n');
  const auto tail = trim(last_nl == std::string::npos ? prompt : prompt.substr(last_nl + 1));
  return normalize(LlmResponse::ok("Noted: " + clip(tail, 200)));
}

LlmResponse SequenceBackend::complete(const LlmRequest&) {
  std::lock_guard lock(mu_);
  if (script_.empty()) return LlmResponse::failed();
  const auto idx = std::min(next_, script_.size() - 1);
  ++next_;
  return normalize(script_[idx]);
}

std::size_t SequenceBackend::calls() const {
  std::lock_guard lock(mu_);
  return next_;
}

// ---------------------------------------------------------------------------
// Cassette

namespace {

nlohmann::json request_json(const LlmRequest& r) {
  return {{"model_tag", r.model_tag},
          {"prompt", r.prompt},
          {"temperature", r.temperature},
          {"max_output_tokens", r.max_output_tokens},
          {"request_id", r.request_id}};
}

nlohmann::json response_json(const LlmResponse& r) {
  return {{"text", r.text}, {"finish_reason", to_string(r.finish_reason)}, {"latency_ms", r.latency_ms}};
}

}  // namespace

CassetteBackend::CassetteBackend(Mode mode, std::filesystem::path path, std::unique_ptr<LlmBackend> inner)
    : mode_(mode), path_(std::move(path)), inner_(std::move(inner)) {
  if (inner_) tag_ = inner_->model_tag();
}

std::unique_ptr<CassetteBackend> CassetteBackend::replay(const std::filesystem::path& path) {
  std::unique_ptr<CassetteBackend> c(new CassetteBackend(Mode::replay, path, nullptr));
  detail::for_each_data_line(path, [&](std::size_t line_no, std::string_view text) {
    try {
      const auto j = nlohmann::json::parse(text);
      Entry e;
      e.key = j.at("key").get<std::string>();
      e.occurrence = j.at("occurrence").get<std::size_t>();
      const auto& rq = j.at("request");
      e.request.model_tag = rq.at("model_tag").get<std::string>();
      e.request.prompt = rq.at("prompt").get<std::string>();
      e.request.temperature = rq.value("temperature", 0.0);
      e.request.max_output_tokens = rq.value("max_output_tokens", 0u);
      e.request.request_id = rq.value("request_id", std::string{});
      const auto& rs = j.at("response");
      e.response.text = rs.at("text").get<std::string>();
      e.response.finish_reason = parse_finish_reason(rs.at("finish_reason").get<std::string>());
      e.response.latency_ms = rs.value("latency_ms", 0.0);
      if (c->tag_.empty()) c->tag_ = e.request.model_tag;
      auto& list = c->entries_[e.key];
      if (e.occurrence != list.size()) {
        throw ValidationError("occurrence out of order for key " + e.key);
      }
      list.push_back(std::move(e));
    } catch (const std::exception& ex) {
      throw ValidationError(path.string() + ":" + std::to_string(line_no) + ": " + ex.what());
    }
  });
  return c;
}

std::unique_ptr<CassetteBackend> CassetteBackend::record(const std::filesystem::path& path,
                                                         std::unique_ptr<LlmBackend> inner) {
  if (!inner) throw ValidationError("cassette recording needs an inner backend");
  return std::unique_ptr<CassetteBackend>(new CassetteBackend(Mode::record, path, std::move(inner)));
}

std::string CassetteBackend::request_key(const LlmRequest& request) {
  Sha256 h;
  h.update(request.model_tag);
  h.update("\x1f");
  h.update(request.prompt);
  h.update("\x1f");
  h.update(request.request_id);
  return h.hex_digest();
}

LlmResponse CassetteBackend::complete(const LlmRequest& request) {
  const auto key = request_key(request);
  if (mode_ == Mode::replay) {
    std::lock_guard lock(mu_);
    auto it = entries_.find(key);
    auto& cursor = cursor_[key];
    if (it == entries_.end() || cursor >= it->second.size()) {
      throw BackendExhausted("cassette " + path_.string() + " has no recorded response for request '" +
                             request.request_id + "'");
    }
    return it->second[cursor++].response;
  }
  auto response = inner_->complete(request);
  std::lock_guard lock(mu_);
  auto& list = entries_[key];
  list.push_back(Entry{key, list.size(), request, response});
  return response;
}

std::string CassetteBackend::model_tag() const { return tag_; }

std::size_t CassetteBackend::size() const {
  std::lock_guard lock(mu_);
  std::size_t n = 0;
  for (const auto& [_, list] : entries_) n += list.size();
  return n;
}

void CassetteBackend::flush() {
  if (mode_ != Mode::record) return;
  std::lock_guard lock(mu_);
  std::string body(kSchemaHeader);
  body.push_back('\n');
  for (const auto& [key, list] : entries_) {
    for (const auto& e : list) {
      nlohmann::json j{{"key", e.key},
                       {"occurrence", e.occurrence},
                       {"request", request_json(e.request)},
                       {"response", response_json(e.response)}};
      body += detail::dump_line(j);
      body.push_back('\n');
    }
  }
  detail::atomic_write(path_, body);
}

// ---------------------------------------------------------------------------
// HTTP

HttpBackend::HttpBackend(HttpBackendConfig cfg) : cfg_(std::move(cfg)) {
  const auto scheme_end = cfg_.endpoint.find("://");
  if (scheme_end == std::string::npos) throw ValidationError("http backend: endpoint needs a scheme");
  const auto path_start = cfg_.endpoint.find('/', scheme_end + 3);
  scheme_host_ = cfg_.endpoint.substr(0, path_start);
  path_ = path_start == std::string::npos ? "/" : cfg_.endpoint.substr(path_start);
  if (!cfg_.api_key_env.empty()) {
    if (const char* key = std::getenv(cfg_.api_key_env.c_str())) api_key_ = key;
  }
}

HttpBackend::~HttpBackend() = default;

void HttpBackend::pace() {
  if (cfg_.requests_per_minute == 0) return;
  using namespace std::chrono;
  const auto interval = static_cast<std::int64_t>(60000 / cfg_.requests_per_minute);
  std::int64_t wait_ms = 0;
  {
    std::lock_guard lock(pace_mu_);
    const auto now = duration_cast<milliseconds>(steady_clock::now().time_since_epoch()).count();
    const auto slot = std::max(now, next_slot_ms_);
    next_slot_ms_ = slot + interval;
    wait_ms = slot - now;
  }
  if (wait_ms > 0) std::this_thread::sleep_for(milliseconds(wait_ms));
}

LlmResponse HttpBackend::parse_completion(const nlohmann::json& body) {
  if (!body.contains("choices") || !body["choices"].is_array() || body["choices"].empty()) {
    return LlmResponse::failed();
  }
  const auto& choice = body["choices"][0];
  const std::string finish = choice.value("finish_reason", std::string("stop"));
  std::string text;
  if (choice.contains("message") && choice["message"].contains("content") &&
      choice["message"]["content"].is_string()) {
    text = choice["message"]["content"].get<std::string>();
  }
  LlmResponse r;
  r.text = std::move(text);
  if (finish == "length") {
    r.finish_reason = FinishReason::truncated;
  } else if (finish == "content_filter") {
    r.finish_reason = FinishReason::refused;
  } else {
    r.finish_reason = FinishReason::complete;
  }
  return normalize(std::move(r));
}

LlmResponse HttpBackend::complete(const LlmRequest& request) {
  using clock = std::chrono::steady_clock;
  httplib::Client client(scheme_host_);
  client.set_connection_timeout(static_cast<time_t>(std::min<std::uint32_t>(cfg_.timeout_s, 30)), 0);
  client.set_read_timeout(static_cast<time_t>(cfg_.timeout_s), 0);
  client.set_write_timeout(static_cast<time_t>(cfg_.timeout_s), 0);
  httplib::Headers headers;
  if (!api_key_.empty()) headers.emplace("Authorization", "Bearer " + api_key_);

  const nlohmann::json payload{{"model", request.model_tag.empty() ? cfg_.model : request.model_tag},
                               {"messages", {{{"role", "user"}, {"content", request.prompt}}}},
                               {"temperature", request.temperature},
                               {"max_tokens", request.max_output_tokens}};
  const std::string body = payload.dump();

  std::string last_problem = "no attempt made";
  for (std::size_t attempt = 0; attempt <= cfg_.max_retries; ++attempt) {
    if (attempt > 0) {
      const auto backoff = std::min<std::uint64_t>(
          static_cast<std::uint64_t>(cfg_.base_backoff_ms) << std::min<std::size_t>(attempt - 1, 16), 30000);
      std::this_thread::sleep_for(std::chrono::milliseconds(backoff));
    }
    pace();
    const auto t0 = clock::now();
    auto res = client.Post(path_, headers, body, "application/json");
    const double ms = std::chrono::duration<double, std::milli>(clock::now() - t0).count();
    if (!res) {
      last_problem = "transport: " + httplib::to_string(res.error());
      continue;
    }
    if (res->status == 429 || res->status >= 500) {
      last_problem = "http status " + std::to_string(res->status);
      continue;
    }
    if (res->status != 200) return LlmResponse::failed();
    try {
      auto out = parse_completion(nlohmann::json::parse(res->body));
      out.latency_ms = ms;
      return out;
    } catch (const nlohmann::json::exception&) {
      return LlmResponse::failed();
    }
  }
  throw BackendExhausted("http backend " + cfg_.endpoint + ": retries exhausted (" + last_problem + ")");
}

// ---------------------------------------------------------------------------

BackendKind parse_backend_kind(std::string_view s) {
  if (s == "stub") return BackendKind::stub;
  if (s == "cassette") return BackendKind::cassette;
  if (s == "http") return BackendKind::http;
  throw ValidationError("unknown backend '" + std::string(s) + "'");
}

std::string_view to_string(BackendKind k) {
  switch (k) {
    case BackendKind::stub: return "stub";
    case BackendKind::cassette: return "cassette";
    case BackendKind::http: return "http";
  }
  return "stub";
}

std::unique_ptr<LlmBackend> make_backend(const BackendConfig& cfg) {
  switch (cfg.kind) {
    case BackendKind::stub:
      return std::make_unique<EchoBackend>(cfg.model_tag);
    case BackendKind::http:
      return std::make_unique<HttpBackend>(cfg.http);
    case BackendKind::cassette: {
      if (cfg.cassette_path.empty()) throw ValidationError("cassette backend needs cassette_path");
      if (!cfg.cassette_record) return CassetteBackend::replay(cfg.cassette_path);
      if (cfg.record_from == BackendKind::cassette) {
        throw ValidationError("cassette cannot record from another cassette");
      }
      BackendConfig inner = cfg;
      inner.kind = cfg.record_from;
      return CassetteBackend::record(cfg.cassette_path, make_backend(inner));
    }
  }
  throw ValidationError("unknown backend kind");
}

void to_json(nlohmann::json& j, const BackendConfig& v) {
  j = nlohmann::json{{"kind", to_string(v.kind)},
                     {"model_tag", v.model_tag},
                     {"cassette_path", v.cassette_path},
                     {"cassette_record", v.cassette_record},
                     {"record_from", to_string(v.record_from)},
                     {"in_flight", v.in_flight},
                     {"http",
                      {{"endpoint", v.http.endpoint},
                       {"api_key_env", v.http.api_key_env},
                       {"model", v.http.model},
                       {"max_retries", v.http.max_retries},
                       {"base_backoff_ms", v.http.base_backoff_ms},
                       {"requests_per_minute", v.http.requests_per_minute},
                       {"timeout_s", v.http.timeout_s}}}};
}

namespace {

void reject_unknown(const nlohmann::json& j, std::initializer_list<std::string_view> known,
                    std::string_view where) {
  for (const auto& [key, _] : j.items()) {
    if (std::find(known.begin(), known.end(), key) == known.end()) {
      throw ValidationError(std::string(where) + ": unknown key '" + key + "'");
    }
  }
}

}  // namespace

void from_json(const nlohmann::json& j, BackendConfig& v) {
  reject_unknown(j, {"kind", "model_tag", "cassette_path", "cassette_record", "record_from", "in_flight", "http"},
                 "backend");
  v = BackendConfig{};
  if (j.contains("kind")) v.kind = parse_backend_kind(j["kind"].get<std::string>());
  v.model_tag = j.value("model_tag", v.model_tag);
  v.cassette_path = j.value("cassette_path", v.cassette_path);
  v.cassette_record = j.value("cassette_record", v.cassette_record);
  if (j.contains("record_from")) v.record_from = parse_backend_kind(j["record_from"].get<std::string>());
  v.in_flight = j.value("in_flight", v.in_flight);
  if (v.in_flight == 0) throw ValidationError("backend: in_flight must be positive");
  if (j.contains("http")) {
    const auto& h = j["http"];
    reject_unknown(h, {"endpoint", "api_key_env", "model", "max_retries", "base_backoff_ms",
                       "requests_per_minute", "timeout_s"},
                   "backend.http");
    v.http.endpoint = h.value("endpoint", v.http.endpoint);
    v.http.api_key_env = h.value("api_key_env", v.http.api_key_env);
    v.http.model = h.value("model", v.http.model);
    v.http.max_retries = h.value("max_retries", v.http.max_retries);
    v.http.base_backoff_ms = h.value("base_backoff_ms", v.http.base_backoff_ms);
    v.http.requests_per_minute = h.value("requests_per_minute", v.http.requests_per_minute);
    v.http.timeout_s = h.value("timeout_s", v.http.timeout_s);
  }
}

}  // namespace unistage
