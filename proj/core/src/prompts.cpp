// Copyright 2026 The unistage Authors
// SPDX-License-Identifier: Apache-2.0

#include "unistage/prompts.hpp"

namespace unistage {

std::string_view to_string(TemplateName n) {
  switch (n) {
    case TemplateName::question_gen: return "question_gen";
    case TemplateName::answer_gen: return "answer_gen";
    case TemplateName::sim_patient: return "sim_patient";
    case TemplateName::judge_single: return "judge_single";
    case TemplateName::judge_multi: return "judge_multi";
    case TemplateName::faithfulness: return "faithfulness";
  }
  return "unknown";
}

namespace {

constexpr std::string_view kQuestionGen =
    "Please create a <question> that closely aligns with the provided <text>. Ensure that the "
    "<question> is formulated in {{target language}} and does not explicitly reference the text. "
    "You may incorporate specific scenarios or contexts in the <question>, allowing the <text> to "
    "serve as a comprehensive and precise answer.\n"
    "\n"
    "<text>: {{domain-specific corpus}}\n"
    "\n"
    "<question>:";

constexpr std::string_view kAnswerGen =
    "You are {{model name}}, equipped with in-depth knowledge in {{domain}}. Your task is to "
    "directly answer the user's <question> in {{target language}}. In formulating your response, "
    "you must thoughtfully reference the <reference text>, ensuring that your reply does not "
    "disclose your reliance on <reference text>. Aim to provide a comprehensive and informative "
    "response, incorporating relevant insights from <reference text> to best assist the user. "
    "Please be cautious to avoid including any content that might raise ethical concerns.\n"
    "\n"
    "<question>: {{question generated by LLM}}\n"
    "\n"
    "<reference text>: {{domain-specific corpus}}\n"
    "\n"
    "<reply>:";

constexpr std::string_view kSimPatient =
    "你是一名患者，下面是你的病情，你正在向医生咨询病情相关的问题，注意这是一个多轮问诊过程，"
    "切记不要让对话结束，要继续追问医生病情有关的问题。\n"
    "{{Patient Case Information}}";

constexpr std::string_view kJudgeRequirements =
    "Requirements: The response should be to the point and adress the problem of user. The "
    "description of symptoms should be comprehensive and accurate, and the provided diagnosis "
    "should be the most reasonable inference based on all relevant factors and possibilities. The "
    "treatment recommendations should be effective and reliable, taking into account the severity "
    "or stages of the illness. The prescriptions should be effective and reliable, considering "
    "indications, contraindications, and dosages.\n";

constexpr std::string_view kJudgeTail =
    "You should tell me whether Assistant 1 is `better than`, `worse than`, or `equal to` "
    "Assistant 2.\n"
    "Please first compare their responses and analyze which one is more in line with the given "
    "requirements.\n"
    "In the last line, please output a single line containing only a single label selecting from "
    "`Assistant 1 is better than Assistant 2`, `Assistant 1 is worse than Assistant 2`, and "
    "`Assistant 1 is equal to Assistant 2`.";

std::string judge_single_body() {
  std::string s =
      "[Question]\n{{Question}}\n[End of Question]\n\n"
      "[Assistant 1]\n{{The Response of Model 1}}\n[End of Assistant 1]\n\n"
      "[Assistant 2]\n{{The Response of Model 2}}\n[End of Assistant 2]\n\n"
      "[System]\n"
      "We would like to request your feedback on the two AI assistants in response to the user "
      "question displayed above.\n";
  s += kJudgeRequirements;
  s += "Please compare the performance of their responses. ";
  s += kJudgeTail;
  return s;
}

std::string judge_multi_body() {
  std::string s =
      "[Assistant 1]\n{{The Conversation from Model 1}}\n[End of Assistant 1]\n\n"
      "[Assistant 2]\n{{The Conversation from Model 2}}\n[End of Assistant 2]\n\n"
      "[System]\n"
      "We would like to request your feedback on two multi-turn conversations between the AI "
      "assistant and the user displayed above.\n";
  s += kJudgeRequirements;
  s += "Please compare the performance of the AI assistant in each conversation. ";
  s += kJudgeTail;
  return s;
}

constexpr std::string_view kFaithfulness =
    "[Source Text]\n{{source text}}\n[End of Source Text]\n\n"
    "[Answer]\n{{answer}}\n[End of Answer]\n\n"
    "[System]\n"
    "Decide whether the answer is grounded in the source text. The answer may be written in a "
    "different language from the source text. It is faithful when its factual content comes from "
    "the source text and it adds no claims that contradict or go beyond it.\n"
    "In the last line, please output a single word: `faithful` or `deviated`.";

}  // namespace

PromptTemplate PromptTemplate::make(TemplateName name, std::string body) {
  PromptTemplate t;
  t.name = name;
  t.body = std::move(body);
  for (auto pos = t.body.find("{{"); pos != std::string::npos; pos = t.body.find("{{", pos + 2)) {
    const auto close = t.body.find("}}", pos + 2);
    if (close == std::string::npos) break;
    t.placeholders.insert(t.body.substr(pos + 2, close - pos - 2));
  }
  return t;
}

const PromptTemplate& builtin_template(TemplateName name) {
  static const PromptTemplate kTemplates[] = {
      PromptTemplate::make(TemplateName::question_gen, std::string(kQuestionGen)),
      PromptTemplate::make(TemplateName::answer_gen, std::string(kAnswerGen)),
      PromptTemplate::make(TemplateName::sim_patient, std::string(kSimPatient)),
      PromptTemplate::make(TemplateName::judge_single, judge_single_body()),
      PromptTemplate::make(TemplateName::judge_multi, judge_multi_body()),
      PromptTemplate::make(TemplateName::faithfulness, std::string(kFaithfulness)),
  };
  return kTemplates[static_cast<std::size_t>(name)];
}

std::string render(const PromptTemplate& tpl, const Bindings& bindings) {
  for (const auto& p : tpl.placeholders) {
    if (!bindings.contains(p)) throw UnboundPlaceholder(p);
  }
  std::string out;
  out.reserve(tpl.body.size());
  std::size_t pos = 0;
  while (pos < tpl.body.size()) {
    const auto open = tpl.body.find("{{", pos);
    const auto close = open == std::string::npos ? open : tpl.body.find("}}", open + 2);
    if (open == std::string::npos || close == std::string::npos) {
      out.append(tpl.body, pos);
      break;
    }
    out.append(tpl.body, pos, open - pos);
    const std::string_view name(tpl.body.data() + open + 2, close - open - 2);
    out += bindings.find(name)->second;
    pos = close + 2;
  }
  return out;
}

}  // namespace unistage
