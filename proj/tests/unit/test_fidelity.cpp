// Copyright 2026 The unistage Authors
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <random>

#include "oracles.hpp"
#include "unistage/error.hpp"
#include "unistage/fidelity.hpp"

using namespace unistage;

TEST_CASE("identical and disjoint texts") {
  UnigramTokenizer tok;
  CHECK(jaccard_1gram("the cat sat", "the cat sat", tok) == 1.0);
  CHECK(jaccard_1gram("the cat sat", "a dog ran", tok) == 0.0);
  CHECK(jaccard_1gram("", "", tok) == 1.0);
}

TEST_CASE("hand-enumerated overlap gives one half") {
  // {the,cat,sat} and {the,dog,sat}: intersection 2, union 4.
  UnigramTokenizer tok;
  CHECK(jaccard_1gram("the cat sat", "the dog sat", tok) == 0.5);
  CHECK(oracle::unigram_jaccard("the cat sat", "the dog sat") == 0.5);
}

TEST_CASE("library Jaccard equals the set oracle on random pairs") {
  UnigramTokenizer tok;
  std::mt19937_64 rng(6);
  const std::vector<std::string> words{"the", "Cat", "sat", "on", "mat", "肝", "肾", "血", "压", ",", "。", " ", "42"};
  for (int i = 0; i < 500; ++i) {
    auto gen = [&] {
      std::string s;
      const auto n = rng() % 15;
      for (std::size_t k = 0; k < n; ++k) s += words[rng() % words.size()] + (rng() % 2 ? " " : "");
      return s;
    };
    const auto a = gen();
    const auto b = gen();
    CHECK(jaccard_1gram(a, b, tok) == oracle::unigram_jaccard(a, b));
  }
}

TEST_CASE("threshold semantics") {
  UnigramTokenizer tok;
  FidelityChecker zero({FidelityMethod::jaccard_1gram, 0.0}, &tok);
  CHECK(zero.check("abc", "xyz").passed);
  FidelityChecker half({FidelityMethod::jaccard_1gram, 0.5}, &tok);
  CHECK(half.check("the cat sat", "the dog sat").passed);
  FidelityChecker strict({FidelityMethod::jaccard_1gram, 0.51}, &tok);
  CHECK_FALSE(strict.check("the cat sat", "the dog sat").passed);
  CHECK_THROWS_AS(FidelityChecker({FidelityMethod::jaccard_1gram, 1.5}, &tok), ValidationError);
  CHECK_THROWS_AS(FidelityChecker({FidelityMethod::model_judge, 0.5}, &tok, nullptr), ValidationError);
}

namespace {

const std::string kEnglishSource =
    "Alzheimer disease is characterized by progressive memory loss, cortical atrophy and amyloid plaques.";
const std::string kChineseAnswer = "阿尔茨海默病的特征是进行性记忆丧失、皮质萎缩和淀粉样斑块。";

}  // namespace

TEST_CASE("a translated answer scores near zero under 1-gram Jaccard") {
  UnigramTokenizer tok;
  const double s = jaccard_1gram(kEnglishSource, kChineseAnswer, tok);
  CHECK(s < 0.05);
  FidelityChecker checker({FidelityMethod::jaccard_1gram, 0.35}, &tok);
  CHECK_FALSE(checker.check(kEnglishSource, kChineseAnswer).passed);
}

TEST_CASE("model judge verdicts") {
  UnigramTokenizer tok;
  FunctionBackend faithful("judge", [](const LlmRequest&) { return LlmResponse::ok("Reasoning...\nfaithful"); });
  FidelityChecker judge({FidelityMethod::model_judge, 0.35}, &tok, &faithful);
  auto v = judge.check(kEnglishSource, kChineseAnswer);
  CHECK(v.passed);
  CHECK(v.score == 1.0);
  CHECK(v.method == FidelityMethod::model_judge);

  FunctionBackend deviated("judge", [](const LlmRequest&) { return LlmResponse::ok("deviated"); });
  FidelityChecker j2({FidelityMethod::model_judge, 0.35}, &tok, &deviated);
  CHECK_FALSE(j2.check("a", "b").passed);
  CHECK(j2.check("a", "b").score == 0.0);
}

TEST_CASE("judge failures fail closed with a reason") {
  UnigramTokenizer tok;
  FunctionBackend broken("judge", [](const LlmRequest&) -> LlmResponse { throw BackendExhausted("down"); });
  FidelityChecker j({FidelityMethod::model_judge, 0.0}, &tok, &broken);
  const auto v = j.check("a", "a");
  CHECK_FALSE(v.passed);
  CHECK(v.reason.starts_with("judge_failure"));

  FunctionBackend refusing("judge", [](const LlmRequest&) { return LlmResponse::refused(); });
  FidelityChecker j2({FidelityMethod::model_judge, 0.0}, &tok, &refusing);
  CHECK_FALSE(j2.check("a", "a").passed);

  FunctionBackend garbled("judge", [](const LlmRequest&) { return LlmResponse::ok("maybe?"); });
  FidelityChecker j3({FidelityMethod::model_judge, 0.0}, &tok, &garbled);
  CHECK(j3.check("a", "a").reason == "judge_unparseable");
}

TEST_CASE("cross-language pairs can be routed to the judge") {
  UnigramTokenizer tok;
  FunctionBackend faithful("judge", [](const LlmRequest&) { return LlmResponse::ok("faithful"); });
  FidelityChecker::Options opts{FidelityMethod::jaccard_1gram, 0.35, true};
  FidelityChecker routed(opts, &tok, &faithful);
  CHECK(routed.method_for(kEnglishSource, kChineseAnswer) == FidelityMethod::model_judge);
  CHECK(routed.check(kEnglishSource, kChineseAnswer).passed);
  CHECK(routed.method_for("same language here", "same language there") == FidelityMethod::jaccard_1gram);
}

TEST_CASE("faithfulness parsing reads the last line") {
  CHECK(parse_faithfulness("analysis\nFaithful") == 1);
  CHECK(parse_faithfulness("faithful so far\nDeviated\n") == 0);
  CHECK(parse_faithfulness("not faithful") == 0);
  CHECK(parse_faithfulness("unsure") == -1);
}
