// Copyright 2026 The unistage Authors
// SPDX-License-Identifier: Apache-2.0

// Deviation detection: does a generated answer stay grounded in its source?

#pragma once

#include <memory>
#include <string>
#include <string_view>

#include "unistage/llm.hpp"
#include "unistage/text.hpp"

namespace unistage {

enum class FidelityMethod { jaccard_1gram, model_judge };

std::string_view to_string(FidelityMethod m);
FidelityMethod parse_fidelity_method(std::string_view s);

// Jaccard coefficient of the 1-gram sets of the two texts. Returns 1.0 when
// both sets are empty.
double jaccard_1gram(std::string_view source, std::string_view answer, const TextTokenizer& tokenizer);

struct FidelityVerdict {
  bool passed = false;
  double score = 0.0;
  FidelityMethod method = FidelityMethod::jaccard_1gram;
  std::string reason;  // empty on a clean pass/fail; set for conventions and judge failures
};

class FidelityChecker {
 public:
  struct Options {
    FidelityMethod method = FidelityMethod::jaccard_1gram;
    double threshold = 0.35;
    // Send pairs whose detected languages differ to the judge, when one is configured.
    bool route_cross_language = false;
    double judge_temperature = 0.0;
  };

  FidelityChecker(Options opts, const TextTokenizer* tokenizer, LlmBackend* judge = nullptr);

  FidelityVerdict check(std::string_view source, std::string_view answer) const;
  FidelityMethod method_for(std::string_view source, std::string_view answer) const;

  const Options& options() const { return opts_; }
  double threshold() const { return opts_.threshold; }

 private:
  FidelityVerdict check_jaccard(std::string_view source, std::string_view answer) const;
  FidelityVerdict check_judge(std::string_view source, std::string_view answer) const;

  Options opts_;
  const TextTokenizer* tokenizer_;
  LlmBackend* judge_;
};

// Parses the last non-empty line of a faithfulness judgement.
// Returns 1 for faithful, 0 for deviated, -1 when unparseable.
int parse_faithfulness(std::string_view judge_output);

}  // namespace unistage
