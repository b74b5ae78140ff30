// Copyright 2026 The unistage Authors
// SPDX-License-Identifier: Apache-2.0

#include "unistage/unify.hpp"

#include <cmath>
#include <set>

#include "unistage/error.hpp"
#include "unistage/prompts.hpp"
#include "parallel.hpp"

namespace unistage {

void UnifyConfig::validate() const {
  if (max_attempts < 1) throw ValidationError("unify: max_attempts must be at least 1");
  if (!(deviation_threshold >= 0.0 && deviation_threshold <= 1.0)) {
    throw ValidationError("unify: deviation_threshold must lie in [0, 1]");
  }
  if (in_flight == 0) throw ValidationError("unify: in_flight must be positive");
  if (target_language.empty() || domain_name.empty() || model_name_in_prompt.empty()) {
    throw ValidationError("unify: prompt settings must be non-empty");
  }
}

void to_json(nlohmann::json& j, const UnifyConfig& v) {
  j = nlohmann::json{{"target_language", v.target_language},
                     {"domain_name", v.domain_name},
                     {"model_name_in_prompt", v.model_name_in_prompt},
                     {"max_attempts", v.max_attempts},
                     {"deviation_threshold", v.deviation_threshold},
                     {"temperature", v.temperature},
                     {"max_output_tokens", v.max_output_tokens},
                     {"in_flight", v.in_flight},
                     {"regenerate_question", v.regenerate_question}};
}

void from_json(const nlohmann::json& j, UnifyConfig& v) {
  static const std::set<std::string> kKeys = {
      "target_language", "domain_name",       "model_name_in_prompt", "max_attempts",       "deviation_threshold",
      "temperature",     "max_output_tokens", "in_flight",            "regenerate_question"};
  for (const auto& [key, _] : j.items()) {
    if (!kKeys.contains(key)) throw ValidationError("unify: unknown key '" + key + "'");
  }
  v = UnifyConfig{};
  v.target_language = j.value("target_language", v.target_language);
  v.domain_name = j.value("domain_name", v.domain_name);
  v.model_name_in_prompt = j.value("model_name_in_prompt", v.model_name_in_prompt);
  v.max_attempts = j.value("max_attempts", v.max_attempts);
  v.deviation_threshold = j.value("deviation_threshold", v.deviation_threshold);
  v.temperature = j.value("temperature", v.temperature);
  v.max_output_tokens = j.value("max_output_tokens", v.max_output_tokens);
  v.in_flight = j.value("in_flight", v.in_flight);
  v.regenerate_question = j.value("regenerate_question", v.regenerate_question);
}

std::string render_question_prompt(const Segment& seg, const UnifyConfig& cfg) {
  return render(builtin_template(TemplateName::question_gen),
                {{std::string(slot::kTargetLanguage), cfg.target_language},
                 {std::string(slot::kCorpus), seg.text}});
}

std::string render_answer_prompt(const Segment& seg, std::string_view question, const UnifyConfig& cfg) {
  return render(builtin_template(TemplateName::answer_gen),
                {{std::string(slot::kModelName), cfg.model_name_in_prompt},
                 {std::string(slot::kDomain), cfg.domain_name},
                 {std::string(slot::kTargetLanguage), cfg.target_language},
                 {std::string(slot::kQuestion), std::string(question)},
                 {std::string(slot::kCorpus), seg.text}});
}

namespace {

LlmResponse request_once(LlmBackend& backend, const std::string& prompt, const UnifyConfig& cfg,
                         std::string request_id) {
  LlmRequest req;
  req.model_tag = backend.model_tag();
  req.prompt = prompt;
  req.temperature = cfg.temperature;
  req.max_output_tokens = cfg.max_output_tokens;
  req.request_id = std::move(request_id);
  return normalize(backend.complete(req));
}

// Retries until a complete response or cfg.max_attempts requests.
GenerationOutcome generate_with_retry(LlmBackend& backend, const std::string& prompt, const UnifyConfig& cfg,
                                      const std::string& id_prefix) {
  GenerationOutcome out;
  for (std::uint32_t a = 1; a <= cfg.max_attempts; ++a) {
    out.attempts = a;
    auto res = request_once(backend, prompt, cfg, id_prefix + std::to_string(a));
    if (res.finish_reason == FinishReason::complete) {
      out.text = std::move(res.text);
      out.reason.clear();
      return out;
    }
    out.reason = std::string(to_string(res.finish_reason));
  }
  return out;
}

struct SegmentOutcome {
  std::optional<InstructionRecord> record;
  DroppedSegment dropped;
};

SegmentOutcome process_segment(const Segment& seg, const UnifyConfig& cfg, LlmBackend& backend,
                               const FidelityChecker& fidelity, const DocClassLookup& doc_class_of) {
  SegmentOutcome out;
  out.dropped.segment_id = seg.id;

  auto question = generate_with_retry(backend, render_question_prompt(seg, cfg), cfg, seg.id + "/q/");
  if (!question.text) {
    out.dropped.reason = question.reason;
    out.dropped.attempts = question.attempts;
    return out;
  }

  std::string last_reason;
  for (std::uint32_t a = 1; a <= cfg.max_attempts; ++a) {
    if (a > 1 && cfg.regenerate_question) {
      question = generate_with_retry(backend, render_question_prompt(seg, cfg), cfg,
                                     seg.id + "/q" + std::to_string(a) + "/");
      if (!question.text) {
        last_reason = question.reason;
        continue;
      }
    }
    auto answer = request_once(backend, render_answer_prompt(seg, *question.text, cfg), cfg,
                               seg.id + "/a/" + std::to_string(a));
    if (answer.finish_reason != FinishReason::complete) {
      last_reason = std::string(to_string(answer.finish_reason));
      continue;
    }
    const auto verdict = fidelity.check(seg.text, answer.text);
    if (!verdict.passed) {
      last_reason = "deviation_rejected";
      continue;
    }
    InstructionRecord rec;
    rec.id = content_id({"unified", seg.id});
    rec.instruction = std::move(*question.text);
    rec.output = std::move(answer.text);
    rec.origin = Origin::pretrain_unified;
    rec.doc_class = doc_class_of ? doc_class_of(seg) : std::nullopt;
    if (!rec.doc_class) throw ValidationError("unify: no doc_class known for segment " + seg.id);
    rec.source_segment = seg.id;
    rec.deviation_score = verdict.score;
    rec.attempts = a;
    rec.model_tag = backend.model_tag();
    out.record = std::move(rec);
    return out;
  }
  out.dropped.reason = last_reason;
  out.dropped.attempts = cfg.max_attempts;
  return out;
}

}  // namespace

GenerationOutcome generate_question(const Segment& seg, const UnifyConfig& cfg, LlmBackend& backend) {
  cfg.validate();
  return generate_with_retry(backend, render_question_prompt(seg, cfg), cfg, seg.id + "/q/");
}

GenerationOutcome generate_answer(const Segment& seg, std::string_view question, const UnifyConfig& cfg,
                                  LlmBackend& backend) {
  cfg.validate();
  return generate_with_retry(backend, render_answer_prompt(seg, question, cfg), cfg, seg.id + "/a/");
}

UnifyResult unify(const std::vector<Segment>& segments, const UnifyConfig& cfg, LlmBackend& backend,
                  const FidelityChecker& fidelity, const DocClassLookup& doc_class_of) {
  cfg.validate();
  if (std::abs(fidelity.threshold() - cfg.deviation_threshold) > 1e-12) {
    throw ValidationError("unify: fidelity threshold differs from deviation_threshold");
  }

  std::vector<SegmentOutcome> outcomes(segments.size());
  detail::parallel_for(segments.size(), cfg.in_flight, [&](std::size_t i) {
    outcomes[i] = process_segment(segments[i], cfg, backend, fidelity, doc_class_of);
  });

  UnifyResult result;
  result.stats.input = segments.size();
  for (auto& o : outcomes) {
    if (o.record) {
      ++result.stats.accepted;
      ++result.stats.attempt_histogram[o.record->attempts];
      result.records.push_back(std::move(*o.record));
    } else {
      ++result.stats.dropped_by_reason[o.dropped.reason];
      result.dropped.push_back(std::move(o.dropped));
    }
  }
  return result;
}

void to_json(nlohmann::json& j, const UnifyStats& v) {
  nlohmann::json hist = nlohmann::json::object();
  for (const auto& [k, n] : v.attempt_histogram) hist[std::to_string(k)] = n;
  j = nlohmann::json{{"input", v.input},
                     {"accepted", v.accepted},
                     {"dropped_by_reason", v.dropped_by_reason},
                     {"attempt_histogram", hist}};
}

void to_json(nlohmann::json& j, const DroppedSegment& v) {
  j = nlohmann::json{{"segment_id", v.segment_id}, {"reason", v.reason}, {"attempts", v.attempts}};
}

}  // namespace unistage
