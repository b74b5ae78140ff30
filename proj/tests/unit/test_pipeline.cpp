// Copyright 2026 The unistage Authors
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include "test_support.hpp"
#include "unistage/error.hpp"
#include "unistage/pipeline.hpp"

using namespace unistage;

namespace {

std::filesystem::path demo_config() { return testing::source_dir() / "data" / "demo" / "config.json"; }

PipelineConfig demo_into(const std::filesystem::path& out) {
  auto cfg = load_config(demo_config());
  cfg.paths.output_dir = out.string();
  return cfg;
}

}  // namespace

TEST_CASE("config json round trip keeps every field") {
  auto cfg = load_config(demo_config());
  cfg.schedule.priorities["book"] = 7;
  cfg.fidelity.route_cross_language = true;
  nlohmann::json j = cfg;
  const auto back = j.get<PipelineConfig>();
  CHECK(nlohmann::json(back) == j);
  CHECK(back.hash() == cfg.hash());
}

TEST_CASE("config hash ignores paths but not settings") {
  auto a = load_config(demo_config());
  auto b = a;
  b.paths.output_dir = "/elsewhere";
  b.paths.input_dir = "/other";
  CHECK(a.hash() == b.hash());
  b.seed += 1;
  CHECK(a.hash() != b.hash());
}

TEST_CASE("unknown keys are rejected by name before any I/O") {
  testing::TempDir dir;
  auto j = nlohmann::json::parse(testing::read_file(demo_config()));
  j["curate"]["dedup_treshold"] = 0.5;
  j["paths"]["output_dir"] = (dir / "never").string();
  testing::write_file(dir / "config.json", j.dump());
  try {
    load_config(dir / "config.json");
    FAIL("expected a validation error");
  } catch (const ValidationError& e) {
    CHECK(std::string(e.what()).find("dedup_treshold") != std::string::npos);
  }
  CHECK_FALSE(std::filesystem::exists(dir / "never"));

  j = nlohmann::json::parse(testing::read_file(demo_config()));
  j["colour"] = 1;
  CHECK_THROWS_WITH_AS(j.get<PipelineConfig>(), doctest::Contains("colour"), ValidationError);
  j = nlohmann::json::parse(testing::read_file(demo_config()));
  j["unify"]["temprature"] = 1;
  CHECK_THROWS_WITH_AS(j.get<PipelineConfig>(), doctest::Contains("temprature"), ValidationError);
}

TEST_CASE("a numeric non-integer beta survives loading and running") {
  testing::TempDir dir;
  auto j = nlohmann::json::parse(testing::read_file(demo_config()));
  j["schedule"]["beta"] = 2.5;
  auto cfg = j.get<PipelineConfig>();
  cfg.base_dir = demo_config().parent_path();
  cfg.paths.output_dir = (dir / "out").string();
  CHECK(cfg.schedule.beta == "5/2");
  const auto m = run(cfg, parse_stages(""));
  CHECK(m.complete());
  CHECK(nlohmann::json(cfg).get<PipelineConfig>().schedule.beta == "5/2");
}

TEST_CASE("invalid settings fail validation") {
  auto cfg = load_config(demo_config());
  cfg.unify_backend = "missing";
  CHECK_THROWS_AS(cfg.validate(), ValidationError);
  cfg = load_config(demo_config());
  cfg.pack.length = 0;
  CHECK_THROWS_AS(cfg.validate(), ValidationError);
  CHECK_THROWS_AS(parse_stages("curate,bake"), ValidationError);
  CHECK(parse_stages("").size() == 4);
  CHECK(parse_stages("pack,schedule") == std::set<Stage>{Stage::schedule, Stage::pack});
}

TEST_CASE("full demo run: funnel, manifest and report") {
  testing::TempDir dir;
  const auto cfg = demo_into(dir / "out");
  const auto m = run(cfg, parse_stages(""));
  CHECK(m.complete());
  for (const char* step : kFunnel) CHECK(m.stage_counts.contains(step));
  // Each curation step and unification can only remove items.
  const char* chain[] = {"segment", "clean", "dedup", "unify"};
  for (std::size_t i = 1; i < std::size(chain); ++i) {
    CHECK(m.stage_counts.at(chain[i]).output <= m.stage_counts.at(chain[i - 1]).output);
    CHECK(m.stage_counts.at(chain[i]).input == m.stage_counts.at(chain[i - 1]).output);
  }
  CHECK(m.stage_counts.at("extract").output > 0);
  CHECK(m.stage_counts.at("pack").output == m.stage_counts.at("schedule").output);

  const auto disk = read_manifest(cfg.output(outputs::kManifest));
  CHECK(disk.digest() == m.digest());
  CHECK(disk.inputs.contains("documents"));
  for (const auto& [name, rec] : disk.stages) {
    CHECK(rec.status == "complete");
    for (const auto& [file, sha] : rec.outputs) CHECK(std::filesystem::exists(cfg.output(file)));
  }
  const auto text = report(disk);
  for (const char* label : {"extracted", "segmented", "cleaned", "deduped", "unified", "scheduled", "packed"}) {
    CHECK(text.find(label) != std::string::npos);
  }
  CHECK(text.find("beta 2") != std::string::npos);
  CHECK(text.find("deviation rejection rate") != std::string::npos);
  CHECK(text.find("[incomplete]") == std::string::npos);
}

TEST_CASE("same config in different directories gives the same digest") {
  testing::TempDir a;
  testing::TempDir b;
  const auto ma = run(demo_into(a / "x"), parse_stages(""));
  const auto mb = run(demo_into(b / "y" / "z"), parse_stages(""));
  CHECK(ma.digest() == mb.digest());
  CHECK(testing::read_file(a / "x" / outputs::kPacked) == testing::read_file(b / "y" / "z" / outputs::kPacked));

  auto other = demo_into(b / "seeded");
  other.seed += 1;
  CHECK(run(other, parse_stages("")).digest() != ma.digest());
}

TEST_CASE("stage gating leaves earlier outputs untouched and marks later ones stale") {
  testing::TempDir dir;
  const auto cfg = demo_into(dir / "out");
  run(cfg, parse_stages(""));
  const auto deduped = testing::read_file(cfg.output(outputs::kDeduped));
  const auto records = testing::read_file(cfg.output(outputs::kRecords));
  const auto stamp = std::filesystem::last_write_time(cfg.output(outputs::kDeduped));

  auto again = cfg;
  again.schedule.beta = "1";
  const auto m = run(again, parse_stages("schedule,pack"));
  CHECK(testing::read_file(cfg.output(outputs::kDeduped)) == deduped);
  CHECK(testing::read_file(cfg.output(outputs::kRecords)) == records);
  CHECK(std::filesystem::last_write_time(cfg.output(outputs::kDeduped)) == stamp);
  CHECK(m.stages.at("curate").status == "complete");
  CHECK(m.complete());

  const auto partial = run(cfg, parse_stages("curate"));
  CHECK(partial.stages.at("curate").status == "complete");
  CHECK(partial.stages.at("unify").status == "stale");
  CHECK(partial.stages.at("pack").status == "stale");
  CHECK_FALSE(partial.complete());
  CHECK(report(partial).find("[incomplete]") != std::string::npos);
}

TEST_CASE("a failing stage leaves a partial manifest") {
  testing::TempDir dir;
  const auto cfg = demo_into(dir / "out");
  FunctionBackend dead("dead", [](const LlmRequest&) -> LlmResponse { throw BackendExhausted("no route"); });
  RunOptions opts;
  opts.backend_overrides["generator"] = &dead;
  CHECK_THROWS_AS(run(cfg, parse_stages(""), opts), BackendExhausted);
  const auto m = read_manifest(cfg.output(outputs::kManifest));
  CHECK(m.stages.at("curate").status == "complete");
  CHECK(m.stages.at("unify").status == "failed");
  CHECK(m.stages.at("unify").error.find("no route") != std::string::npos);
  CHECK(m.stages.at("schedule").status == "pending");
  CHECK_FALSE(m.complete());
  const auto text = report(m);
  CHECK(text.find("unify failed") != std::string::npos);
  CHECK(text.find("(pending)") != std::string::npos);
}

TEST_CASE("missing inputs surface as errors") {
  testing::TempDir dir;
  auto cfg = demo_into(dir / "out");
  cfg.paths.documents = "nope.jsonl";
  CHECK_THROWS_AS(run(cfg, parse_stages("curate")), IoError);
  auto fresh = demo_into(dir / "fresh");
  CHECK_THROWS_AS(run(fresh, parse_stages("unify")), IoError);
}
