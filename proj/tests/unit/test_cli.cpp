// Copyright 2026 The unistage Authors
// SPDX-License-Identifier: Apache-2.0

// Drives the built command-line tool and checks its exit codes:
// 0 success, 1 validation, 2 stage failure, 3 backend exhausted.

#include <doctest.h>

#include <sys/wait.h>

#include <cstdlib>

#include "test_support.hpp"
#include "unistage/pipeline.hpp"

namespace {

struct Result {
  int code = -1;
  std::string out;
  std::string err;
};

Result cli(const testing::TempDir& dir, const std::string& args) {
  const auto out = dir / "stdout.txt";
  const auto err = dir / "stderr.txt";
  const std::string cmd = std::string("\"") + UNISTAGE_CLI + "\" " + args + " >\"" + out.string() + "\" 2>\"" +
                          err.string() + "\"";
  const int status = std::system(cmd.c_str());
  Result r;
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  r.out = testing::read_file(out);
  r.err = testing::read_file(err);
  return r;
}

std::string demo_config() { return (testing::source_dir() / "data" / "demo" / "config.json").string(); }

std::string q(const std::filesystem::path& p) { return "\"" + p.string() + "\""; }

constexpr const char* kSchema = "#schema=unistage/v1\n";

}  // namespace

TEST_CASE("help and version exit 0") {
  testing::TempDir dir;
  CHECK(cli(dir, "--help").code == 0);
  const auto v = cli(dir, "--version");
  CHECK(v.code == 0);
  CHECK(v.out.find(std::string(unistage::tool_version())) != std::string::npos);
}

TEST_CASE("run on the demo config succeeds and report reads the manifest") {
  testing::TempDir dir;
  const auto r = cli(dir, "run --config " + demo_config() + " --out " + q(dir / "out"));
  CHECK(r.code == 0);
  CHECK(r.out.find("funnel") != std::string::npos);
  CHECK(std::filesystem::exists(dir / "out" / "manifest.json"));
  const auto rep = cli(dir, "report " + q(dir / "out"));
  CHECK(rep.code == 0);
  CHECK(rep.out.find("packed") != std::string::npos);
}

TEST_CASE("validation problems exit 1") {
  testing::TempDir dir;
  CHECK(cli(dir, "run --no-such-flag").code == 1);
  CHECK(cli(dir, "bake").code == 1);

  auto j = nlohmann::json::parse(testing::read_file(demo_config()));
  j["pack"]["lenght"] = 10;
  testing::write_file(dir / "bad.json", j.dump());
  const auto r = cli(dir, "run --config " + q(dir / "bad.json") + " --out " + q(dir / "out"));
  CHECK(r.code == 1);
  CHECK(r.err.find("lenght") != std::string::npos);
  CHECK_FALSE(std::filesystem::exists(dir / "out"));

  CHECK(cli(dir, "run --config " + demo_config() + " --stages curate,bake --out " + q(dir / "o2")).code == 1);
}

TEST_CASE("a stage that cannot find its inputs exits 2") {
  testing::TempDir dir;
  const auto r = cli(dir, "run --config " + demo_config() + " --stages unify --out " + q(dir / "fresh"));
  CHECK(r.code == 2);
  const auto m = unistage::read_manifest(dir / "fresh" / "manifest.json");
  CHECK(m.stages.at("unify").status == "failed");
}

TEST_CASE("an unreachable model endpoint exits 3") {
  testing::TempDir dir;
  auto j = nlohmann::json::parse(testing::read_file(demo_config()));
  j["backends"]["generator"] = {{"kind", "http"},
                                {"http",
                                 {{"endpoint", "http://127.0.0.1:1/v1/chat/completions"},
                                  {"api_key_env", ""},
                                  {"max_retries", 1},
                                  {"base_backoff_ms", 1},
                                  {"timeout_s", 2}}}};
  const auto cfg = testing::source_dir() / "data" / "demo";
  // Inputs stay next to the shipped config; only the backend changes.
  j["paths"]["input_dir"] = cfg.string();
  testing::write_file(dir / "http.json", j.dump());
  const auto r = cli(dir, "run --config " + q(dir / "http.json") + " --out " + q(dir / "out"));
  CHECK(r.code == 3);
  CHECK(r.err.find("backend exhausted") != std::string::npos);
}

TEST_CASE("eval mc scores responses and fidelity prints a verdict") {
  testing::TempDir dir;
  testing::write_file(dir / "items.jsonl",
                      std::string(kSchema) +
                          R"({"id":"1","question":"q1","options":{"A":"a","B":"b"},"gold":"A","section":"s"})"
                          "\n"
                          R"({"id":"2","question":"q2","options":{"A":"a","B":"b"},"gold":"B","section":"s"})"
                          "\n");
  testing::write_file(dir / "resp.jsonl", std::string(kSchema) + R"({"id":"1","response":"答案是A"})"
                                                                 "\n"
                                                                 R"({"id":"2","response":"A"})"
                                                                 "\n");
  const auto r = cli(dir, "eval mc --items " + q(dir / "items.jsonl") + " --responses " + q(dir / "resp.jsonl"));
  CHECK(r.code == 0);
  CHECK(r.out.find("total\t2\t2\t50.0") != std::string::npos);

  testing::write_file(dir / "src.txt", "the cat sat");
  testing::write_file(dir / "ans.txt", "the dog sat");
  const auto f = cli(dir, "fidelity --threshold 0.5 " + q(dir / "src.txt") + " " + q(dir / "ans.txt"));
  CHECK(f.code == 0);
  const auto v = nlohmann::json::parse(f.out);
  CHECK(v.at("score").get<double>() == doctest::Approx(0.5));
  CHECK(v.at("passed").get<bool>());
}
