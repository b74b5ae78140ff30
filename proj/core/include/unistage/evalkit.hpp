// Copyright 2026 The unistage Authors
// SPDX-License-Identifier: Apache-2.0

// Evaluation: zero-shot multiple-choice prompting and scoring, pairwise
// LLM-as-judge comparison with both presentation orders, and a simulated
// patient driver for multi-round comparisons.

#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "unistage/llm.hpp"
#include "unistage/model.hpp"

namespace unistage {

// ---------------------------------------------------------------------------
// Multiple choice

struct McOption {
  std::string label;  // single letter A..E
  std::string text;
};

struct EvalItem {
  std::string id;
  std::string question;
  std::vector<McOption> options;  // presentation order
  std::set<std::string> gold;
  std::string section;
  // Marks a multiple-answer item even when its gold set happens to be a singleton.
  bool multiple = false;

  bool is_multi() const { return multiple || gold.size() > 1; }
  std::set<std::string> labels() const;
};

void validate(const EvalItem& item);

// Items are stored one per line. "options" is either an array of
// {"label","text"} objects (order kept) or an object keyed by label.
void to_json(nlohmann::json& j, const EvalItem& v);
void from_json(const nlohmann::json& j, EvalItem& v);

// Instruction line, question, then "LABEL. text" per option, newline joined.
// Language::other gets the English instruction.
std::string build_mc_prompt(const EvalItem& item, Language language);

enum class ExtractRule { leading_label, answer_phrase, unique_mention, abstain };
std::string_view to_string(ExtractRule r);

struct Extraction {
  std::set<std::string> labels;  // empty on abstain
  ExtractRule rule = ExtractRule::abstain;

  bool abstained() const { return labels.empty(); }
};

// Cascade: leading label(s), then an "answer is X" phrase, then the only
// label mentioned standalone anywhere; otherwise abstain. With multi=false
// a rule that finds more than one label does not fire.
Extraction extract_choice(std::string_view output, const std::set<std::string>& allowed, bool multi);

enum class MultiScoring { exact_set, partial_credit };

struct SectionScore {
  std::size_t items = 0;
  std::size_t parsed = 0;  // items with a non-abstain extraction
  double credit = 0.0;     // correct count, fractional under partial credit
  double accuracy_all = 0.0;     // percent, abstentions count as wrong
  double accuracy_parsed = 0.0;  // percent over parsed items only
};

struct ScoreTable {
  std::map<std::string, SectionScore> sections;
  SectionScore overall;         // item-weighted over all sections
  double macro_accuracy = 0.0;  // unweighted mean of section accuracy_all
  std::size_t abstentions = 0;
};

// Every item needs an extraction under its id; throws ValidationError otherwise.
ScoreTable score(const std::vector<EvalItem>& items, const std::map<std::string, Extraction>& extractions,
                 MultiScoring rule = MultiScoring::exact_set);

void to_json(nlohmann::json& j, const ScoreTable& v);
std::string render_score_table(const ScoreTable& t);

// ---------------------------------------------------------------------------
// Pairwise judging

enum class Orientation { AB, BA };
enum class JudgeLabel { first_better, second_better, equal };
enum class Outcome { win, tie, fail };  // from model 1's side

std::string_view to_string(Orientation o);
std::string_view to_string(JudgeLabel l);
std::string_view to_string(Outcome o);

// Reads the last non-empty line of a judge reply.
std::optional<JudgeLabel> parse_judge_label(std::string_view reply);

struct JudgeVerdict {
  std::string item_id;
  Orientation orientation = Orientation::AB;
  JudgeLabel verdict = JudgeLabel::equal;
  std::string rationale;
  bool unparsed = false;  // no label after the re-ask; verdict forced to equal
};

// One comparison. For single-round items `question` is the user question and
// the responses are answers; for multi-round items the responses are whole
// rendered conversations and `question` is unused.
struct JudgeCase {
  std::string id;
  std::string question;
  std::string response1;
  std::string response2;
};

struct ItemComparison {
  std::string id;
  Outcome outcome = Outcome::tie;
  JudgeVerdict ab;
  JudgeVerdict ba;
  bool flagged = false;
};

struct ComparisonResult {
  std::string model1;
  std::string model2;
  std::size_t win = 0;
  std::size_t tie = 0;
  std::size_t fail = 0;
  std::size_t flagged = 0;
  double win_tie_rate = 0.0;
  std::vector<ItemComparison> items;
};

struct PairwiseOptions {
  bool multi_round = false;
  double temperature = 0.0;
  std::uint32_t max_output_tokens = 1024;
  std::size_t in_flight = 1;
  std::string model1 = "model1";
  std::string model2 = "model2";
};

// Joins questions with both models' responses by id. Throws ValidationError
// when an id is missing on either side.
std::vector<JudgeCase> align_responses(const std::vector<std::pair<std::string, std::string>>& questions,
                                       const std::map<std::string, std::string>& responses1,
                                       const std::map<std::string, std::string>& responses2);

std::string render_judge_prompt(const JudgeCase& c, Orientation o, bool multi_round);

// Both orientations per case; matching verdicts decide, anything else is a tie.
ComparisonResult pairwise_judge(const std::vector<JudgeCase>& cases, LlmBackend& judge,
                                 const PairwiseOptions& options = {});

void to_json(nlohmann::json& j, const ComparisonResult& v);
std::string render_comparison(const ComparisonResult& r);

// ---------------------------------------------------------------------------
// Simulated patient

struct DialogueOptions {
  std::size_t turns = 2;  // doctor messages
  double temperature = 0.7;
  std::uint32_t max_output_tokens = 1024;
  std::string id = "dialogue";
  bool throw_on_failure = false;
};

struct Transcript {
  std::vector<ChatTurn> turns;  // user = patient, assistant = doctor
  bool aborted = false;
  std::string failure;

  std::size_t doctor_messages() const;
};

// Conversation text in the form the multi-round judge template receives.
std::string render_transcript(const Transcript& t);

// Patient speaks first from the patient prompt filled with case_info; each
// doctor reply follows. Stops after options.turns doctor messages. A refused
// or failed reply aborts the dialogue (or throws StageError when
// throw_on_failure). Throws ValidationError on empty case_info or turns == 0.
Transcript simulate_patient_dialogue(std::string_view case_info, LlmBackend& doctor, LlmBackend& patient,
                                     const DialogueOptions& options = {});

void to_json(nlohmann::json& j, const Transcript& v);

}  // namespace unistage
