// Copyright 2026 The unistage Authors
// SPDX-License-Identifier: Apache-2.0

#include "unistage/fidelity.hpp"

#include <algorithm>
#include <unordered_set>

#include "unistage/digest.hpp"
#include "unistage/error.hpp"
#include "unistage/prompts.hpp"

namespace unistage {

std::string_view to_string(FidelityMethod m) {
  return m == FidelityMethod::jaccard_1gram ? "jaccard_1gram" : "model_judge";
}

FidelityMethod parse_fidelity_method(std::string_view s) {
  if (s == "jaccard" || s == "jaccard_1gram") return FidelityMethod::jaccard_1gram;
  if (s == "judge" || s == "model_judge") return FidelityMethod::model_judge;
  throw ValidationError("unknown fidelity method '" + std::string(s) + "'");
}

double jaccard_1gram(std::string_view source, std::string_view answer, const TextTokenizer& tokenizer) {
  const auto a_tokens = tokenizer.tokenize(source);
  const auto b_tokens = tokenizer.tokenize(answer);
  const std::unordered_set<std::string> a(a_tokens.begin(), a_tokens.end());
  const std::unordered_set<std::string> b(b_tokens.begin(), b_tokens.end());
  if (a.empty() && b.empty()) return 1.0;
  const auto& small = a.size() <= b.size() ? a : b;
  const auto& large = a.size() <= b.size() ? b : a;
  std::size_t inter = 0;
  for (const auto& t : small) inter += large.contains(t) ? 1 : 0;
  return static_cast<double>(inter) / static_cast<double>(a.size() + b.size() - inter);
}

int parse_faithfulness(std::string_view judge_output) {
  std::string_view s = judge_output;
  while (!s.empty() && (s.back() == '\n' || s.back() == '\r' || s.back() == ' ')) s.remove_suffix(1);
  const auto nl = s.rfind('\n');
  std::string line(nl == std::string_view::npos ? s : s.substr(nl + 1));
  std::transform(line.begin(), line.end(), line.begin(), [](unsigned char c) {
    return static_cast<char>(std::tolower(c));
  });
  const bool deviated = line.find("deviated") != std::string::npos ||
                        line.find("unfaithful") != std::string::npos ||
                        line.find("not faithful") != std::string::npos;
  const bool faithful = line.find("faithful") != std::string::npos;
  if (deviated) return 0;
  if (faithful) return 1;
  return -1;
}

FidelityChecker::FidelityChecker(Options opts, const TextTokenizer* tokenizer, LlmBackend* judge)
    : opts_(opts), tokenizer_(tokenizer), judge_(judge) {
  if (!(opts_.threshold >= 0.0 && opts_.threshold <= 1.0)) {
    throw ValidationError("fidelity threshold must lie in [0, 1]");
  }
  if (opts_.method == FidelityMethod::model_judge && judge_ == nullptr) {
    throw ValidationError("model_judge fidelity needs a judge backend");
  }
  if (opts_.method == FidelityMethod::jaccard_1gram && tokenizer_ == nullptr) {
    throw ValidationError("jaccard_1gram fidelity needs a tokenizer");
  }
}

FidelityMethod FidelityChecker::method_for(std::string_view source, std::string_view answer) const {
  if (opts_.method == FidelityMethod::jaccard_1gram && opts_.route_cross_language && judge_ != nullptr &&
      detect_language(source) != detect_language(answer)) {
    return FidelityMethod::model_judge;
  }
  return opts_.method;
}

FidelityVerdict FidelityChecker::check(std::string_view source, std::string_view answer) const {
  return method_for(source, answer) == FidelityMethod::jaccard_1gram ? check_jaccard(source, answer)
                                                                     : check_judge(source, answer);
}

FidelityVerdict FidelityChecker::check_jaccard(std::string_view source, std::string_view answer) const {
  FidelityVerdict v;
  v.method = FidelityMethod::jaccard_1gram;
  v.score = jaccard_1gram(source, answer, *tokenizer_);
  v.passed = v.score >= opts_.threshold;
  if (tokenizer_->count(source) == 0 && tokenizer_->count(answer) == 0) v.reason = "both_empty";
  return v;
}

FidelityVerdict FidelityChecker::check_judge(std::string_view source, std::string_view answer) const {
  FidelityVerdict v;
  v.method = FidelityMethod::model_judge;
  const auto prompt = render(builtin_template(TemplateName::faithfulness),
                             {{std::string(slot::kSourceText), std::string(source)},
                              {std::string(slot::kAnswer), std::string(answer)}});
  LlmRequest req;
  req.model_tag = judge_->model_tag();
  req.prompt = prompt;
  req.temperature = opts_.judge_temperature;
  req.max_output_tokens = 256;
  req.request_id = "fidelity:" + sha256_hex(prompt).substr(0, 16);
  LlmResponse res;
  try {
    res = judge_->complete(req);
  } catch (const std::exception& e) {
    v.reason = std::string("judge_failure: ") + e.what();
    return v;
  }
  if (res.finish_reason != FinishReason::complete) {
    v.reason = "judge_failure: " + std::string(to_string(res.finish_reason));
    return v;
  }
  const int verdict = parse_faithfulness(res.text);
  if (verdict < 0) {
    v.reason = "judge_unparseable";
    return v;
  }
  v.score = verdict;
  v.passed = verdict == 1 && v.score >= opts_.threshold;
  return v;
}

}  // namespace unistage
