// Copyright 2026 The unistage Authors
// SPDX-License-Identifier: Apache-2.0

// Prompt templates with {{name}} placeholders.

#pragma once

#include <map>
#include <set>
#include <string>
#include <string_view>

#include "unistage/error.hpp"

namespace unistage {

enum class TemplateName { question_gen, answer_gen, sim_patient, judge_single, judge_multi, faithfulness };

std::string_view to_string(TemplateName n);

// Placeholder names used by the built-in templates.
namespace slot {
inline constexpr std::string_view kTargetLanguage = "target language";
inline constexpr std::string_view kCorpus = "domain-specific corpus";
inline constexpr std::string_view kModelName = "model name";
inline constexpr std::string_view kDomain = "domain";
inline constexpr std::string_view kQuestion = "question generated by LLM";
inline constexpr std::string_view kPatientCase = "Patient Case Information";
inline constexpr std::string_view kJudgeQuestion = "Question";
inline constexpr std::string_view kResponse1 = "The Response of Model 1";
inline constexpr std::string_view kResponse2 = "The Response of Model 2";
inline constexpr std::string_view kConversation1 = "The Conversation from Model 1";
inline constexpr std::string_view kConversation2 = "The Conversation from Model 2";
inline constexpr std::string_view kSourceText = "source text";
inline constexpr std::string_view kAnswer = "answer";
}  // namespace slot

class UnboundPlaceholder : public ValidationError {
 public:
  explicit UnboundPlaceholder(const std::string& name)
      : ValidationError("unbound placeholder '" + name + "'"), name_(name) {}
  const std::string& name() const { return name_; }

 private:
  std::string name_;
};

struct PromptTemplate {
  TemplateName name = TemplateName::question_gen;
  std::string body;
  std::set<std::string> placeholders;

  // Collects placeholders from `body`.
  static PromptTemplate make(TemplateName name, std::string body);
};

const PromptTemplate& builtin_template(TemplateName name);

using Bindings = std::map<std::string, std::string, std::less<>>;

// Single-pass substitution of every {{name}}; substituted text is not rescanned.
// Throws UnboundPlaceholder naming the first unbound placeholder.
std::string render(const PromptTemplate& tpl, const Bindings& bindings);

}  // namespace unistage
