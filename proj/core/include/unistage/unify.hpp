// Copyright 2026 The unistage Authors
// SPDX-License-Identifier: Apache-2.0

// Turns curated segments into instruction/output records: a question is
// generated from the segment, then an answer from question plus segment,
// and answers that drift from the segment are regenerated.

#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "unistage/fidelity.hpp"
#include "unistage/llm.hpp"
#include "unistage/model.hpp"

namespace unistage {

struct UnifyConfig {
  std::string target_language = "Chinese";
  std::string domain_name = "medicine";
  std::string model_name_in_prompt = "HuatuoGPT-II";
  std::uint32_t max_attempts = 3;
  double deviation_threshold = 0.35;
  double temperature = 0.7;
  std::uint32_t max_output_tokens = 1024;
  std::size_t in_flight = 1;
  // Regenerate the question as well as the answer after a failed answer.
  bool regenerate_question = false;

  void validate() const;
};

void to_json(nlohmann::json& j, const UnifyConfig& v);
void from_json(const nlohmann::json& j, UnifyConfig& v);

struct GenerationOutcome {
  std::optional<std::string> text;
  std::uint32_t attempts = 0;
  std::string reason;  // finish reason of the last failed attempt
};

std::string render_question_prompt(const Segment& seg, const UnifyConfig& cfg);
std::string render_answer_prompt(const Segment& seg, std::string_view question, const UnifyConfig& cfg);

// Both retry refused, truncated and errored responses up to cfg.max_attempts.
GenerationOutcome generate_question(const Segment& seg, const UnifyConfig& cfg, LlmBackend& backend);
GenerationOutcome generate_answer(const Segment& seg, std::string_view question, const UnifyConfig& cfg,
                                  LlmBackend& backend);

struct DroppedSegment {
  std::string segment_id;
  std::string reason;  // refused | truncated | error | deviation_rejected
  std::uint32_t attempts = 0;
};

struct UnifyStats {
  std::size_t input = 0;
  std::size_t accepted = 0;
  std::map<std::string, std::size_t> dropped_by_reason;
  std::map<std::uint32_t, std::size_t> attempt_histogram;  // accepted records by attempts
};

struct UnifyResult {
  std::vector<InstructionRecord> records;  // input order
  std::vector<DroppedSegment> dropped;     // input order
  UnifyStats stats;
};

using DocClassLookup = std::function<std::optional<DocClass>(const Segment&)>;

// Throws ValidationError when the fidelity threshold differs from
// cfg.deviation_threshold, and lets BackendExhausted propagate.
UnifyResult unify(const std::vector<Segment>& segments, const UnifyConfig& cfg, LlmBackend& backend,
                  const FidelityChecker& fidelity, const DocClassLookup& doc_class_of);

void to_json(nlohmann::json& j, const UnifyStats& v);

void to_json(nlohmann::json& j, const DroppedSegment& v);

}  // namespace unistage
