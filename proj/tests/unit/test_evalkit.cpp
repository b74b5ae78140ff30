// Copyright 2026 The unistage Authors
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <atomic>
#include <string>
#include <vector>

#include "unistage/error.hpp"
#include "unistage/evalkit.hpp"

using namespace unistage;

namespace {

EvalItem cirrhosis_item() {
  EvalItem it;
  it.id = "cirrhosis";
  it.question = "对评估肝硬化患者预后意义不大的是";
  it.options = {{"A", "腹水"}, {"B", "清蛋白"}, {"C", "血电解质"}, {"D", "凝血酶原时间"}};
  it.gold = {"C"};
  return it;
}

std::set<std::string> L(std::string_view s) {
  std::set<std::string> out;
  for (char c : s) out.insert(std::string(1, c));
  return out;
}

struct Fixture {
  const char* text;
  const char* allowed;
  bool multi;
  const char* expected;  // "" means abstain
};

// Labels assigned by hand reading each reply.
const Fixture kFixtures[] = {
    {"B", "ABCD", false, "B"},
    {"B.", "ABCD", false, "B"},
    {"(C)", "ABCD", false, "C"},
    {"答案是D", "ABCD", false, "D"},
    {"答案：A。腹水提示门脉高压。", "ABCD", false, "A"},
    {"The answer is C.", "ABCD", false, "C"},
    {"I cannot determine the answer from the information given.", "ABCD", false, ""},
    {"I think the answer is (B) because albumin reflects synthesis.", "ABCD", false, "B"},
    {"D. 凝血酶原时间", "ABCD", false, "D"},
    {"选项C正确", "ABCD", false, "C"},
    {"A patient with cirrhosis usually needs a full workup.", "ABCD", false, ""},
    {"答案为B。", "ABCD", false, "B"},
    {"Answer: E", "ABCDE", false, "E"},
    {"The correct option is B, since the others are prognostic.", "ABCD", false, "B"},
    {"Both A and B are plausible here.", "ABCD", false, ""},
    {"故选C", "ABCD", false, "C"},
    {"答案是Ｂ", "ABCD", false, "B"},
    {"正确答案：D", "ABCD", false, "D"},
    {"C is correct.", "ABCD", false, "C"},
    {"None of the options is clearly right.", "ABCD", false, ""},
    {"答案是 A 和 C", "ABCD", false, ""},
    {"答案是AB", "ABCD", false, ""},
    {"Option D is the best choice.", "ABCD", false, "D"},
    {"B\n解析：清蛋白反映肝脏合成功能。", "ABCD", false, "B"},
    {"答案应该是C，因为血电解质与预后关系不大。", "ABCD", false, "C"},
    {"I would choose A.", "ABCD", false, "A"},
    {"A. 腹水", "ABCD", false, "A"},
    {"【答案】B", "ABCD", false, "B"},
    {"答案：B或D", "ABCD", false, ""},
    {"答案是E", "ABCD", false, ""},
    {"答案是：C", "ABCD", false, "C"},
    {"Answer: (D)", "ABCD", false, "D"},
    {"I believe the answer would be B", "ABCD", false, "B"},
    {"A, B", "ABCD", false, ""},
    {"答案选B。", "ABCD", false, "B"},
    {"Based on the symptoms, D is the most likely.", "ABCD", false, "D"},
    {"Neither option fits this presentation.", "ABCD", false, ""},
    {"The answer is B and C", "ABCD", false, ""},
    {"ABD", "ABCDE", true, "ABD"},
    {"答案：ACE", "ABCDE", true, "ACE"},
    {"A、B、D", "ABCDE", true, "ABD"},
    {"The answer is A and C.", "ABCDE", true, "AC"},
    {"答案是 A 和 C", "ABCDE", true, "AC"},
    {"A, C, and D", "ABCDE", true, "ACD"},
    {"(A)(C)", "ABCDE", true, "AC"},
    {"B", "ABCDE", true, "B"},
    {"I cannot determine", "ABCDE", true, ""},
    {"ＡＣ", "ABCDE", true, "AC"},
    {"C和D", "ABCDE", true, "CD"},
    {"答案为 B、C、E", "ABCDE", true, "BCE"},
    {"B and D", "ABCDE", true, "BD"},
    {"A and C are correct", "ABCDE", true, "AC"},
};

std::string between(const std::string& s, const std::string& open, const std::string& close) {
  const auto a = s.find(open);
  REQUIRE(a != std::string::npos);
  const auto b = s.find(close, a + open.size());
  REQUIRE(b != std::string::npos);
  return s.substr(a + open.size(), b - a - open.size());
}

std::vector<JudgeCase> cases(std::size_t n) {
  std::vector<JudgeCase> out;
  for (std::size_t i = 0; i < n; ++i) {
    out.push_back({"q" + std::to_string(i), "问题" + std::to_string(i), std::string(10 + i % 7, 'x'),
                   std::string(3 + i % 5, 'y')});
  }
  return out;
}

}  // namespace

TEST_CASE("chinese multiple-choice prompt matches the reference layout byte for byte") {
  const std::string expected =
      "请回答下面选择题。\n对评估肝硬化患者预后意义不大的是\nA. 腹水\nB. 清蛋白\nC. 血电解质\nD. 凝血酶原时间";
  CHECK(build_mc_prompt(cirrhosis_item(), Language::zh) == expected);
}

TEST_CASE("two-option items and the english instruction") {
  EvalItem it;
  it.id = "yn";
  it.question = "Is ascites a prognostic sign?";
  it.options = {{"A", "Yes"}, {"B", "No"}};
  it.gold = {"A"};
  validate(it);
  CHECK(build_mc_prompt(it, Language::en) ==
        "Please answer the following multiple choice questions.\nIs ascites a prognostic sign?\nA. Yes\nB. No");
  CHECK(build_mc_prompt(it, Language::other) == build_mc_prompt(it, Language::en));
}

TEST_CASE("eval item json accepts both option shapes and string gold") {
  const auto a = nlohmann::json::parse(
                     R"({"id":"x","question":"q","options":[{"label":"B","text":"b"},{"label":"A","text":"a"}],"gold":"AB"})")
                     .get<EvalItem>();
  CHECK(a.options[0].label == "B");
  CHECK(a.gold == L("AB"));
  CHECK(a.is_multi());
  const auto b = nlohmann::json::parse(R"({"id":"y","question":"q","options":{"A":"a","B":"b"},"gold":["B"]})")
                     .get<EvalItem>();
  CHECK(b.options.size() == 2);
  CHECK_FALSE(b.is_multi());
  nlohmann::json round = a;
  CHECK(round.get<EvalItem>().options[1].text == "a");
  CHECK_THROWS_AS(nlohmann::json::parse(R"({"id":"z","question":"q","options":{"A":"a"},"gold":"A"})").get<EvalItem>(),
                  ValidationError);
  CHECK_THROWS_AS(
      nlohmann::json::parse(R"({"id":"z","question":"q","options":{"A":"a","B":"b"},"gold":"C"})").get<EvalItem>(),
      ValidationError);
  CHECK_THROWS_AS(
      nlohmann::json::parse(R"({"id":"z","question":"q","options":{"A":"a","B":"b"},"gold":"A","x":1})")
          .get<EvalItem>(),
      ValidationError);
}

TEST_CASE("hand-labeled extraction fixtures") {
  CHECK(std::size(kFixtures) >= 50);
  for (const auto& f : kFixtures) {
    CAPTURE(f.text);
    CAPTURE(f.multi);
    const auto got = extract_choice(f.text, L(f.allowed), f.multi);
    CHECK(got.labels == L(f.expected));
    CHECK(got.abstained() == (std::string_view(f.expected).empty()));
    if (got.abstained()) CHECK(got.rule == ExtractRule::abstain);
  }
}

TEST_CASE("extraction never returns a label outside the option set") {
  for (const auto& f : kFixtures) {
    const auto got = extract_choice(f.text, L("AB"), f.multi);
    for (const auto& l : got.labels) CHECK((l == "A" || l == "B"));
  }
}

TEST_CASE("scoring: all correct, hand-scored 7 of 10, abstentions") {
  std::vector<EvalItem> items;
  std::map<std::string, Extraction> ext;
  const char* gold = "ABCDABCDAB";
  // Items 3 and 6 are answered wrongly and item 9 abstains.
  const char* reply = "ABCAABADA ";
  for (int i = 0; i < 10; ++i) {
    auto it = cirrhosis_item();
    it.id = "i" + std::to_string(i);
    it.gold = {std::string(1, gold[i])};
    it.section = i < 5 ? "s1" : "s2";
    items.push_back(it);
    ext[it.id] = reply[i] == ' ' ? Extraction{} : Extraction{{std::string(1, reply[i])}, ExtractRule::leading_label};
  }
  const auto t = score(items, ext);
  CHECK(t.overall.items == 10);
  CHECK(t.overall.parsed == 9);
  CHECK(t.abstentions == 1);
  CHECK(t.overall.accuracy_all == doctest::Approx(70.0));
  CHECK(t.overall.accuracy_parsed == doctest::Approx(700.0 / 9.0));
  CHECK(t.sections.at("s1").accuracy_all == doctest::Approx(80.0));
  CHECK(t.sections.at("s2").accuracy_all == doctest::Approx(60.0));
  CHECK(t.macro_accuracy == doctest::Approx(70.0));

  std::map<std::string, Extraction> perfect;
  for (const auto& it : items) perfect[it.id] = Extraction{it.gold, ExtractRule::leading_label};
  CHECK(score(items, perfect).overall.accuracy_all == doctest::Approx(100.0));

  ext.erase("i4");
  CHECK_THROWS_AS(score(items, ext), ValidationError);
  CHECK(render_score_table(t).find("total\t10\t9\t70.0") != std::string::npos);
}

TEST_CASE("multi-answer scoring rules") {
  auto it = cirrhosis_item();
  it.gold = {"A", "B"};
  std::map<std::string, Extraction> ext{{it.id, Extraction{{"A"}, ExtractRule::leading_label}}};
  CHECK(score({it}, ext, MultiScoring::exact_set).overall.accuracy_all == doctest::Approx(0.0));
  CHECK(score({it}, ext, MultiScoring::partial_credit).overall.accuracy_all == doctest::Approx(50.0));
  // A wrong extra label earns nothing even with partial credit.
  ext[it.id].labels = {"A", "C"};
  CHECK(score({it}, ext, MultiScoring::partial_credit).overall.accuracy_all == doctest::Approx(0.0));
  ext[it.id].labels = {"A", "B"};
  CHECK(score({it}, ext, MultiScoring::exact_set).overall.accuracy_all == doctest::Approx(100.0));
}

TEST_CASE("judge label parsing reads the last non-empty line") {
  CHECK(parse_judge_label("reasons...\nAssistant 1 is better than Assistant 2\n\n") == JudgeLabel::first_better);
  CHECK(parse_judge_label("**Assistant 2 is better than Assistant 1**") == JudgeLabel::second_better);
  CHECK(parse_judge_label("Assistant 1 is worse than Assistant 2.") == JudgeLabel::second_better);
  CHECK(parse_judge_label("assistant 2 is equal to assistant 1") == JudgeLabel::equal);
  CHECK_FALSE(parse_judge_label("Assistant 1 is better than Assistant 2\nI am not sure").has_value());
  CHECK_FALSE(parse_judge_label("").has_value());
  CHECK_FALSE(
      parse_judge_label("Assistant 1 is better than Assistant 2; Assistant 2 is better than Assistant 1").has_value());
}

TEST_CASE("always-equal judge gives only ties") {
  FunctionBackend judge("j", [](const LlmRequest&) { return LlmResponse::ok("Assistant 1 is equal to Assistant 2"); });
  const auto r = pairwise_judge(cases(20), judge);
  CHECK(r.tie == 20);
  CHECK(r.win + r.fail == 0);
  CHECK(r.win_tie_rate == doctest::Approx(1.0));
  CHECK(r.flagged == 0);
}

TEST_CASE("a judge preferring the longer answer makes the longer model win in both orders") {
  FunctionBackend judge("j", [](const LlmRequest& req) {
    const auto a = between(req.prompt, "[Assistant 1]\n", "\n[End of Assistant 1]");
    const auto b = between(req.prompt, "[Assistant 2]\n", "\n[End of Assistant 2]");
    return LlmResponse::ok(a.size() > b.size() ? "Assistant 1 is better than Assistant 2"
                                               : "Assistant 2 is better than Assistant 1");
  });
  PairwiseOptions opt;
  opt.in_flight = 4;
  const auto r = pairwise_judge(cases(30), judge, opt);
  CHECK(r.win == 30);
  CHECK(r.win_tie_rate == doctest::Approx(1.0));
  for (const auto& it : r.items) {
    CHECK(it.ab.verdict == JudgeLabel::first_better);
    CHECK(it.ba.verdict == JudgeLabel::second_better);
  }
  // Swapping the models turns every win into a fail.
  auto swapped = cases(30);
  for (auto& c : swapped) std::swap(c.response1, c.response2);
  const auto s = pairwise_judge(swapped, judge, opt);
  CHECK(s.fail == 30);
  CHECK(s.win_tie_rate == doctest::Approx(0.0));
}

TEST_CASE("a judge that always prefers position one yields ties") {
  FunctionBackend judge("j", [](const LlmRequest&) { return LlmResponse::ok("Assistant 1 is better than Assistant 2"); });
  const auto r = pairwise_judge(cases(25), judge);
  CHECK(r.tie == 25);
  CHECK(r.win == 0);
  CHECK(r.fail == 0);
}

TEST_CASE("unparseable judge output is re-asked once then flagged as a tie") {
  std::atomic<int> calls{0};
  std::atomic<int> reasks{0};
  FunctionBackend judge("j", [&](const LlmRequest& req) {
    ++calls;
    if (req.prompt.find("Reply again") != std::string::npos) ++reasks;
    return LlmResponse::ok("Both have merits.");
  });
  const auto r = pairwise_judge(cases(3), judge);
  CHECK(calls == 12);
  CHECK(reasks == 6);
  CHECK(r.tie == 3);
  CHECK(r.flagged == 3);
  CHECK(r.items[0].ab.unparsed);
  CHECK(render_comparison(r).find("flagged") != std::string::npos);

  // A clean answer on the re-ask is accepted.
  FunctionBackend second("j", [](const LlmRequest& req) {
    if (req.prompt.find("Reply again") == std::string::npos) return LlmResponse::ok("hmm");
    return LlmResponse::ok(req.request_id.find("/AB/") != std::string::npos ? "Assistant 1 is better than Assistant 2"
                                                                           : "Assistant 2 is better than Assistant 1");
  });
  const auto ok = pairwise_judge(cases(2), second);
  CHECK(ok.win == 2);
  CHECK(ok.flagged == 0);
}

TEST_CASE("multi-round judging uses the conversation template") {
  std::string seen;
  FunctionBackend judge("j", [&](const LlmRequest& req) {
    seen = req.prompt;
    return LlmResponse::ok("Assistant 1 is equal to Assistant 2");
  });
  PairwiseOptions opt;
  opt.multi_round = true;
  pairwise_judge({{"c", "", "患者：头痛\n医生：多久了？", "患者：头痛\n医生：请就医。"}}, judge, opt);
  CHECK(seen.find("[Question]") == std::string::npos);
  CHECK(seen.find("multi-turn conversations") != std::string::npos);
}

TEST_CASE("align_responses joins by id") {
  const auto c = align_responses({{"a", "qa"}, {"b", "qb"}}, {{"a", "1a"}, {"b", "1b"}}, {{"a", "2a"}, {"b", "2b"}});
  REQUIRE(c.size() == 2);
  CHECK(c[1].response2 == "2b");
  CHECK_THROWS_AS(align_responses({{"a", "qa"}}, {}, {{"a", "2a"}}), ValidationError);
}

TEST_CASE("simulated patient dialogue") {
  std::atomic<int> patient_calls{0};
  FunctionBackend patient("p", [&](const LlmRequest& req) {
    CHECK(req.prompt.find("反复头痛三个月") != std::string::npos);
    return LlmResponse::ok("我头痛" + std::to_string(++patient_calls));
  });
  FunctionBackend doctor("d", [](const LlmRequest& req) {
    return LlmResponse::ok("请问" + std::to_string(req.prompt.size()));
  });
  DialogueOptions opt;
  opt.turns = 2;
  const auto t = simulate_patient_dialogue("反复头痛三个月", doctor, patient, opt);
  CHECK_FALSE(t.aborted);
  REQUIRE(t.turns.size() == 4);
  CHECK(t.doctor_messages() == 2);
  CHECK(t.turns[0].role == Role::user);
  CHECK(t.turns[0].text == "我头痛1");
  CHECK(t.turns[1].role == Role::assistant);
  CHECK(t.turns[1].text == "请问" + std::to_string(std::string("患者：我头痛1").size()));
  CHECK(render_transcript(t).rfind("患者：我头痛1\n医生：", 0) == 0);

  patient_calls = 0;
  const auto again = simulate_patient_dialogue("反复头痛三个月", doctor, patient, opt);
  CHECK(render_transcript(again) == render_transcript(t));

  CHECK_THROWS_AS(simulate_patient_dialogue("  \n", doctor, patient, opt), ValidationError);
  opt.turns = 0;
  CHECK_THROWS_AS(simulate_patient_dialogue("病例", doctor, patient, opt), ValidationError);
}

TEST_CASE("a refusing doctor aborts the dialogue") {
  FunctionBackend patient("p", [](const LlmRequest&) { return LlmResponse::ok("我发烧"); });
  SequenceBackend doctor("d", {LlmResponse::ok("多久了？"), LlmResponse::refused()});
  DialogueOptions opt;
  opt.turns = 3;
  const auto t = simulate_patient_dialogue("发热两天", doctor, patient, opt);
  CHECK(t.aborted);
  CHECK(t.doctor_messages() == 1);
  CHECK(t.failure.find("doctor") != std::string::npos);
  SequenceBackend doctor2("d", {LlmResponse::refused()});
  opt.throw_on_failure = true;
  CHECK_THROWS_AS(simulate_patient_dialogue("发热两天", doctor2, patient, opt), StageError);
}
