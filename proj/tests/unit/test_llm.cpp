// Copyright 2026 The unistage Authors
// SPDX-License-Identifier: Apache-2.0

#define CPPHTTPLIB_OPENSSL_SUPPORT
#include <httplib.h>

#include <doctest.h>

#include <atomic>
#include <cstdlib>
#include <thread>

#include "test_support.hpp"
#include "unistage/error.hpp"
#include "unistage/jsonl.hpp"
#include "unistage/llm.hpp"

using namespace unistage;

namespace {

LlmRequest req(std::string prompt, std::string id = "r0") {
  LlmRequest r;
  r.model_tag = "m";
  r.prompt = std::move(prompt);
  r.request_id = std::move(id);
  return r;
}

// Local chat-completions server whose status sequence is scripted.
class ScriptedServer {
 public:
  explicit ScriptedServer(std::vector<int> statuses) : statuses_(std::move(statuses)) {
    server_.Post("/v1/chat/completions", [this](const httplib::Request& rq, httplib::Response& rs) {
      const auto n = hits_++;
      last_body_ = rq.body;
      const int status = statuses_[std::min<std::size_t>(n, statuses_.size() - 1)];
      rs.status = status;
      if (status == 200) {
        const auto body = nlohmann::json::parse(rq.body);
        const std::string prompt = body["messages"][0]["content"];
        nlohmann::json reply{{"choices",
                              {{{"finish_reason", prompt == "long" ? "length" : "stop"},
                                {"message", {{"role", "assistant"}, {"content", "echo:" + prompt}}}}}}};
        rs.set_content(reply.dump(), "application/json");
      } else {
        rs.set_content("{\"error\":\"scripted\"}", "application/json");
      }
    });
    port_ = server_.bind_to_any_port("127.0.0.1");
    thread_ = std::thread([this] { server_.listen_after_bind(); });
    server_.wait_until_ready();
  }
  ~ScriptedServer() {
    server_.stop();
    thread_.join();
  }

  HttpBackendConfig config(std::size_t retries) const {
    HttpBackendConfig c;
    c.endpoint = "http://127.0.0.1:" + std::to_string(port_) + "/v1/chat/completions";
    c.api_key_env = "";
    c.model = "local";
    c.max_retries = retries;
    c.base_backoff_ms = 1;
    c.timeout_s = 5;
    return c;
  }
  int hits() const { return hits_; }
  std::string last_body() const { return last_body_; }

 private:
  std::vector<int> statuses_;
  httplib::Server server_;
  std::thread thread_;
  int port_ = 0;
  std::atomic<int> hits_{0};
  std::string last_body_;
};

}  // namespace

TEST_CASE("normalize enforces the empty-text rule") {
  CHECK(normalize(LlmResponse{"x", FinishReason::refused, 0}).text.empty());
  CHECK(normalize(LlmResponse{"x", FinishReason::error, 0}).text.empty());
  CHECK(normalize(LlmResponse{"", FinishReason::complete, 0}).finish_reason == FinishReason::refused);
  CHECK(normalize(LlmResponse::ok("fine")).text == "fine");
}

TEST_CASE("finish reason names round-trip") {
  for (auto r : {FinishReason::complete, FinishReason::truncated, FinishReason::refused, FinishReason::error}) {
    CHECK(parse_finish_reason(to_string(r)) == r);
  }
}

TEST_CASE("sequence backend replays its script and repeats the tail") {
  SequenceBackend b("seq", {LlmResponse::refused(), LlmResponse::ok("a"), LlmResponse::ok("b")});
  CHECK(b.complete(req("p")).finish_reason == FinishReason::refused);
  CHECK(b.complete(req("p")).text == "a");
  CHECK(b.complete(req("p")).text == "b");
  CHECK(b.complete(req("p")).text == "b");
  CHECK(b.calls() == 4);
}

TEST_CASE("cassette records and replays bit-identically") {
  testing::TempDir dir;
  const auto path = dir / "c.jsonl";
  std::atomic<int> calls{0};
  auto inner = std::make_unique<FunctionBackend>("inner", [&](const LlmRequest& r) {
    return LlmResponse::ok(r.prompt + "#" + std::to_string(calls++));
  });
  std::vector<std::string> recorded;
  {
    auto rec = CassetteBackend::record(path, std::move(inner));
    recorded.push_back(rec->complete(req("hello", "a")).text);
    recorded.push_back(rec->complete(req("hello", "a")).text);  // same key, second occurrence
    recorded.push_back(rec->complete(req("world", "b")).text);
    rec->flush();
    CHECK(rec->size() == 3);
  }
  const std::string bytes = testing::read_file(path);
  auto play = CassetteBackend::replay(path);
  // Replay reports the model tag of the recorded requests.
  CHECK(play->model_tag() == "m");
  CHECK(play->complete(req("hello", "a")).text == recorded[0]);
  CHECK(play->complete(req("hello", "a")).text == recorded[1]);
  CHECK(play->complete(req("world", "b")).text == recorded[2]);
  CHECK_THROWS_AS(play->complete(req("hello", "a")), BackendExhausted);
  CHECK_THROWS_AS(play->complete(req("unseen", "z")), BackendExhausted);
  // Replay never rewrites the cassette.
  play->flush();
  CHECK(testing::read_file(path) == bytes);
}

TEST_CASE("cassette key ignores temperature but not request id") {
  auto a = req("p", "x");
  auto b = a;
  b.temperature = 0.0;
  CHECK(CassetteBackend::request_key(a) == CassetteBackend::request_key(b));
  b.request_id = "y";
  CHECK(CassetteBackend::request_key(a) != CassetteBackend::request_key(b));
}

TEST_CASE("corrupt cassette is a validation error") {
  testing::TempDir dir;
  testing::write_file(dir / "bad.jsonl", std::string(kSchemaHeader) + "\n{\"key\":1}\n");
  CHECK_THROWS_AS(CassetteBackend::replay(dir / "bad.jsonl"), ValidationError);
}

TEST_CASE("completion bodies map to finish reasons") {
  using nlohmann::json;
  auto body = [](const char* finish, const char* text) {
    return json{{"choices", {{{"finish_reason", finish}, {"message", {{"content", text}}}}}}};
  };
  CHECK(HttpBackend::parse_completion(body("stop", "hi")).text == "hi");
  CHECK(HttpBackend::parse_completion(body("length", "hi")).finish_reason == FinishReason::truncated);
  CHECK(HttpBackend::parse_completion(body("content_filter", "")).finish_reason == FinishReason::refused);
  CHECK(HttpBackend::parse_completion(json::object()).finish_reason == FinishReason::error);
}

TEST_CASE("http backend talks to a chat-completions endpoint") {
  ScriptedServer server({200});
  HttpBackend b(server.config(0));
  const auto r = b.complete(req("ping"));
  CHECK(r.finish_reason == FinishReason::complete);
  CHECK(r.text == "echo:ping");
  const auto sent = nlohmann::json::parse(server.last_body());
  CHECK(sent["model"] == "m");
  CHECK(sent["messages"][0]["role"] == "user");
  CHECK(b.complete(req("long")).finish_reason == FinishReason::truncated);
}

TEST_CASE("http backend retries 429 and 5xx then succeeds") {
  ScriptedServer server({429, 503, 200});
  HttpBackend b(server.config(3));
  CHECK(b.complete(req("x")).text == "echo:x");
  CHECK(server.hits() == 3);
}

TEST_CASE("http 4xx is a content error without retries") {
  ScriptedServer server({400});
  HttpBackend b(server.config(3));
  CHECK(b.complete(req("x")).finish_reason == FinishReason::error);
  CHECK(server.hits() == 1);
}

TEST_CASE("http retries exhausted raise BackendExhausted") {
  ScriptedServer server({500});
  HttpBackend b(server.config(2));
  CHECK_THROWS_AS(b.complete(req("x")), BackendExhausted);
  CHECK(server.hits() == 3);
}

TEST_CASE("unreachable endpoint exhausts retries") {
  HttpBackendConfig c;
  c.endpoint = "http://127.0.0.1:1/v1/chat/completions";
  c.api_key_env = "";
  c.max_retries = 1;
  c.base_backoff_ms = 1;
  c.timeout_s = 2;
  HttpBackend b(c);
  CHECK_THROWS_AS(b.complete(req("x")), BackendExhausted);
}

TEST_CASE("backend config round-trips and builds backends") {
  BackendConfig c;
  c.kind = BackendKind::stub;
  c.model_tag = "tag";
  nlohmann::json j = c;
  const auto back = j.get<BackendConfig>();
  CHECK(back.kind == BackendKind::stub);
  CHECK(back.model_tag == "tag");
  CHECK(make_backend(back)->model_tag() == "tag");
  BackendConfig cas;
  cas.kind = BackendKind::cassette;
  CHECK_THROWS_AS(make_backend(cas), ValidationError);
  CHECK_THROWS_AS(parse_backend_kind("grpc"), ValidationError);
}

TEST_CASE("echo backend answers judge and faithfulness prompts") {
  EchoBackend e;
  CHECK(e.complete(req("[System]\n... Assistant 1 is equal to Assistant 2 ...")).text ==
        "Assistant 1 is equal to Assistant 2");
  CHECK(e.complete(req("Reply with `faithful` or `deviated`.")).text == "faithful");
}
