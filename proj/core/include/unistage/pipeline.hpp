// Copyright 2026 The unistage Authors
// SPDX-License-Identifier: Apache-2.0

// Stage orchestration: curate -> unify -> schedule -> pack, one config file,
// one run manifest.

#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <set>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "unistage/dedup.hpp"
#include "unistage/fidelity.hpp"
#include "unistage/llm.hpp"
#include "unistage/sampler.hpp"
#include "unistage/text.hpp"
#include "unistage/unify.hpp"

namespace unistage {

std::string_view tool_version();

// Relative paths resolve against `base_dir`, which is the directory of the
// config file when loaded from disk. Paths are locations, so they are left
// out of the config hash; input contents are digested separately.
struct PathsConfig {
  std::string input_dir = ".";
  std::string output_dir = "out";
  std::string documents = "documents.jsonl";
  std::string dictionary = "dictionary.txt";
  std::string stoplist;  // optional
  std::string sft;       // optional fine-tuning records
};

struct CurateConfig {
  double density_threshold = 0.02;
  Normalization normalization = Normalization::lowercase_fold;
  std::size_t min_term_length = 1;
  std::size_t window = 1024;
  std::size_t flank = 1;
  std::string quality_judge = "heuristic";  // heuristic | none
  double quality_threshold = 0.5;
  DedupMethod dedup_method = DedupMethod::ngram_jaccard;
  double dedup_threshold = 0.8;
  std::size_t shingle_size = 5;
  std::size_t num_permutations = 64;
  double error_budget = 0.001;
};

struct FidelityStageConfig {
  FidelityMethod method = FidelityMethod::jaccard_1gram;
  bool route_cross_language = false;
  std::string judge_backend;  // name in `backends`; empty = none
  double judge_temperature = 0.0;
};

struct ScheduleConfig {
  std::string beta = "2";
  bool strict_beta_zero = false;
  std::uint32_t pretrain_epochs = kPretrainEpochs;
  std::uint32_t sft_epochs = kFineTuningEpochs;
  std::map<std::string, std::uint32_t> priorities;  // doc class -> K; missing classes use the defaults
  std::uint32_t sft_priority = kFineTuningPriority;
  std::size_t bins = 20;
  std::size_t mix_curve_points = 11;
};

struct PackConfig {
  std::size_t length = 4096;
  std::string tokenizer = "desk";  // desk | path to a vocabulary spec
};

struct PipelineConfig {
  std::uint64_t seed = 20231016;
  PathsConfig paths;
  CurateConfig curate;
  UnifyConfig unify;
  std::string unify_backend = "generator";
  FidelityStageConfig fidelity;
  ScheduleConfig schedule;
  PackConfig pack;
  std::map<std::string, BackendConfig> backends{{"generator", BackendConfig{}}};

  std::filesystem::path base_dir = ".";  // not serialized

  void validate() const;
  std::filesystem::path resolve(const std::string& p) const;
  std::filesystem::path input(const std::string& name) const;
  std::filesystem::path output(const std::string& name) const;

  // Digest of the serialized config without the paths section.
  std::string hash() const;
};

void to_json(nlohmann::json& j, const PipelineConfig& v);
// Rejects unknown keys at every level, naming the offending key.
void from_json(const nlohmann::json& j, PipelineConfig& v);
PipelineConfig load_config(const std::filesystem::path& path);

enum class Stage { curate, unify, schedule, pack };
inline constexpr Stage kAllStages[] = {Stage::curate, Stage::unify, Stage::schedule, Stage::pack};
std::string_view to_string(Stage s);
Stage parse_stage(std::string_view s);
// Comma-separated list; empty means all stages.
std::set<Stage> parse_stages(std::string_view list);

// The seven funnel steps, in order.
inline constexpr const char* kFunnel[] = {"extract", "segment", "clean", "dedup", "unify", "schedule", "pack"};

struct StageCount {
  std::uint64_t input = 0;
  std::uint64_t output = 0;
};

struct StageRecord {
  std::string status = "pending";  // pending | complete | failed
  std::string error;
  std::map<std::string, std::string> outputs;  // file name -> SHA-256
  nlohmann::json details = nlohmann::json::object();
};

struct RunManifest {
  std::string config_hash;
  std::map<std::string, StageCount> stage_counts;  // keyed by funnel step
  std::uint64_t seed = 0;
  std::string tool_version;
  nlohmann::json recorded_train_hparams;  // recorded only, never acted on
  std::map<std::string, std::string> inputs;  // input role (documents, dictionary, ...) -> SHA-256
  std::map<std::string, StageRecord> stages;  // keyed by Stage name
  nlohmann::json config;                      // resolved config

  bool complete() const;
  // SHA-256 over the canonical JSON form without the digest field.
  std::string digest() const;
};

nlohmann::json default_train_hparams();

void to_json(nlohmann::json& j, const RunManifest& v);
void from_json(const nlohmann::json& j, RunManifest& v);

// Fixed output file names inside the output directory.
namespace outputs {
inline constexpr const char* kExtracted = "extracted.jsonl";
inline constexpr const char* kDensity = "density.jsonl";
inline constexpr const char* kSegments = "segments.jsonl";
inline constexpr const char* kCleaned = "cleaned.jsonl";
inline constexpr const char* kDeduped = "deduped.jsonl";
inline constexpr const char* kDedupDecisions = "dedup_decisions.jsonl";
inline constexpr const char* kRecords = "records.jsonl";
inline constexpr const char* kDropped = "dropped.jsonl";
inline constexpr const char* kSchedule = "schedule.jsonl";
inline constexpr const char* kScheduleSummary = "schedule_summary.json";
inline constexpr const char* kPacked = "packed.jsonl";
inline constexpr const char* kPackStats = "pack_stats.json";
inline constexpr const char* kManifest = "manifest.json";
}  // namespace outputs

struct RunOptions {
  // Backends by name; entries here take precedence over `config.backends`
  // (tests inject scripted backends this way).
  std::map<std::string, LlmBackend*> backend_overrides;
};

// Runs the requested stages in fixed order. The manifest is rewritten after
// every stage; an existing manifest in the output directory is carried over
// for stages not re-run. On failure the stage is marked failed, the partial
// manifest is written and the exception propagates.
RunManifest run(const PipelineConfig& config, const std::set<Stage>& stages, const RunOptions& options = {});

RunManifest read_manifest(const std::filesystem::path& path);
void write_manifest(const RunManifest& m, const std::filesystem::path& path);

// Funnel, beta and mix-curve table, deviation rejection rate.
std::string report(const RunManifest& manifest);

}  // namespace unistage
