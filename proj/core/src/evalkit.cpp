// Copyright 2026 The unistage Authors
// SPDX-License-Identifier: Apache-2.0

#include "unistage/evalkit.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <span>
#include <sstream>

#include "unistage/error.hpp"
#include "unistage/prompts.hpp"
#include "unistage/text.hpp"
#include "parallel.hpp"

namespace unistage {

namespace {

bool is_label(std::string_view s) { return s.size() == 1 && s[0] >= 'A' && s[0] <= 'E'; }

std::string percent(double v) {
  std::ostringstream os;
  os.setf(std::ios::fixed);
  os.precision(1);
  os << v;
  return os.str();
}

}  // namespace

std::set<std::string> EvalItem::labels() const {
  std::set<std::string> out;
  for (const auto& o : options) out.insert(o.label);
  return out;
}

void validate(const EvalItem& item) {
  if (item.id.empty()) throw ValidationError("eval item: empty id");
  if (item.question.empty()) throw ValidationError("eval item " + item.id + ": empty question");
  if (item.options.size() < 2) throw ValidationError("eval item " + item.id + ": fewer than two options");
  std::set<std::string> seen;
  for (const auto& o : item.options) {
    if (!is_label(o.label)) throw ValidationError("eval item " + item.id + ": option label must be one of A..E");
    if (!seen.insert(o.label).second) throw ValidationError("eval item " + item.id + ": duplicate label " + o.label);
  }
  if (item.gold.empty()) throw ValidationError("eval item " + item.id + ": empty gold set");
  for (const auto& g : item.gold) {
    if (!seen.contains(g)) throw ValidationError("eval item " + item.id + ": gold label " + g + " is not an option");
  }
}

void to_json(nlohmann::json& j, const EvalItem& v) {
  nlohmann::json opts = nlohmann::json::array();
  for (const auto& o : v.options) opts.push_back({{"label", o.label}, {"text", o.text}});
  j = nlohmann::json{{"id", v.id}, {"question", v.question}, {"options", opts}, {"gold", v.gold}, {"section", v.section}};
  if (v.multiple) j["multiple"] = true;
}

void from_json(const nlohmann::json& j, EvalItem& v) {
  static const std::set<std::string> kKeys{"id", "question", "options", "gold", "section", "multiple"};
  for (const auto& [k, _] : j.items()) {
    if (!kKeys.contains(k)) throw ValidationError("eval item: unknown key '" + k + "'");
  }
  v = EvalItem{};
  v.id = j.at("id").get<std::string>();
  v.question = j.at("question").get<std::string>();
  const auto& opts = j.at("options");
  if (opts.is_array()) {
    for (const auto& o : opts) v.options.push_back({o.at("label").get<std::string>(), o.at("text").get<std::string>()});
  } else {
    for (const auto& [label, text] : opts.items()) v.options.push_back({label, text.get<std::string>()});
  }
  const auto& gold = j.at("gold");
  if (gold.is_string()) {
    // "AC" style is accepted as well as ["A", "C"].
    for (char c : gold.get<std::string>()) v.gold.insert(std::string(1, c));
  } else {
    v.gold = gold.get<std::set<std::string>>();
  }
  v.section = j.value("section", std::string{});
  v.multiple = j.value("multiple", false);
  validate(v);
}

std::string build_mc_prompt(const EvalItem& item, Language language) {
  std::string out = language == Language::zh ? "请回答下面选择题。" : "Please answer the following multiple choice questions.";
  out += '\n';
  out += item.question;
  for (const auto& o : item.options) {
    out += '\n';
    out += o.label;
    out += ". ";
    out += o.text;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Choice extraction

std::string_view to_string(ExtractRule r) {
  switch (r) {
    case ExtractRule::leading_label: return "leading_label";
    case ExtractRule::answer_phrase: return "answer_phrase";
    case ExtractRule::unique_mention: return "unique_mention";
    case ExtractRule::abstain: return "abstain";
  }
  return "abstain";
}

namespace {

// Fullwidth Latin capitals become ASCII so "答案是Ｂ" parses like "答案是B".
std::string fold_fullwidth(std::string_view text) {
  std::string out;
  out.reserve(text.size());
  for (const auto& cp : decode_utf8(text)) {
    if (cp.value >= 0xFF21 && cp.value <= 0xFF3A) {
      out.push_back(static_cast<char>('A' + (cp.value - 0xFF21)));
    } else {
      out.append(text.substr(cp.offset, cp.length));
    }
  }
  return out;
}

bool ascii_alnum(char c) { return std::isalnum(static_cast<unsigned char>(c)) != 0; }
bool ascii_alpha(char c) { return std::isalpha(static_cast<unsigned char>(c)) != 0; }

bool starts_with_any(std::string_view s, std::size_t pos, std::span<const std::string_view> list,
                     std::size_t& len) {
  for (auto t : list) {
    if (s.substr(pos).starts_with(t)) {
      len = t.size();
      return true;
    }
  }
  return false;
}

void skip_spaces(std::string_view s, std::size_t& pos) {
  while (pos < s.size() && (s[pos] == ' ' || s[pos] == '\t')) ++pos;
}

constexpr std::array<std::string_view, 9> kOpeners = {"(", "（", "【", "[", "「", "\"", "“", ":", "："};
constexpr std::array<std::string_view, 7> kClosers = {")", "）", "】", "]", "」", "\"", "”"};
constexpr std::array<std::string_view, 10> kSeparators = {",", "，", "、", "和", "及", "与", "或", "/", "&", "+"};
constexpr std::array<std::string_view, 4> kBracketOpeners = {"(", "（", "【", "["};

bool starts_with_word(std::string_view s, std::size_t pos, std::size_t& len) {
  for (std::string_view w : {"and ", "or "}) {
    if (s.substr(pos).starts_with(w)) {
      len = w.size();
      return true;
    }
  }
  return false;
}

// Parses "A", "AC", "A, C", "A 和 C", "A, C, and D", "(A)(C)" starting at
// pos. Sets pos past the last label consumed; returns an empty set when no
// label starts there. Lists are followed in single-choice mode too, so that
// "A or C" yields two labels and the caller can refuse it; only glued runs
// such as "AC" are multi-choice specific.
std::set<std::string> parse_label_list(std::string_view s, std::size_t& pos, const std::set<std::string>& allowed,
                                       bool multi) {
  std::set<std::string> out;
  std::size_t p = pos;
  std::size_t len = 0;
  for (;;) {
    skip_spaces(s, p);
    while (starts_with_any(s, p, kOpeners, len)) {
      p += len;
      skip_spaces(s, p);
    }
    std::size_t e = p;
    while (e < s.size() && ascii_alpha(s[e])) ++e;
    if (e == p || (e < s.size() && std::isdigit(static_cast<unsigned char>(s[e])))) break;
    const auto run = s.substr(p, e - p);
    if (run.size() > 1 && !multi) break;
    std::set<std::string> got;
    bool ok = true;
    for (char c : run) {
      std::string l(1, c);
      if (!allowed.contains(l) || !got.insert(l).second) ok = false;
    }
    if (!ok) break;
    out.insert(got.begin(), got.end());
    p = e;
    while (starts_with_any(s, p, kClosers, len)) p += len;
    pos = p;
    // Continue across a separator ("A, C", "A, and C", "A or C") or straight
    // into another bracketed label ("(A)(C)").
    std::size_t q = p;
    skip_spaces(s, q);
    if (starts_with_any(s, q, kSeparators, len)) {
      q += len;
      skip_spaces(s, q);
      if (starts_with_word(s, q, len)) q += len;
    } else if (starts_with_word(s, q, len)) {
      q += len;
    } else if (q == p && starts_with_any(s, q, kBracketOpeners, len)) {
      // adjacent bracket: handled by the opener loop
    } else {
      break;
    }
    p = q;
  }
  return out;
}

std::optional<std::set<std::string>> rule_leading(std::string_view s, const std::set<std::string>& allowed,
                                                  bool multi) {
  std::size_t pos = 0;
  while (pos < s.size() && std::isspace(static_cast<unsigned char>(s[pos]))) ++pos;
  auto labels = parse_label_list(s, pos, allowed, multi);
  if (labels.empty()) return std::nullopt;
  // "A patient ..." or "B is ..." is prose, not a bare answer. A list of
  // several labels is an answer whatever follows it.
  if (labels.size() == 1 && pos < s.size() && s[pos] == ' ') {
    std::size_t q = pos;
    skip_spaces(s, q);
    if (q < s.size() && ascii_alpha(s[q])) return std::nullopt;
  }
  if (pos < s.size() && ascii_alnum(s[pos])) return std::nullopt;
  return labels;
}

std::string ascii_lower(std::string_view s) {
  std::string out(s);
  for (auto& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

std::optional<std::set<std::string>> rule_phrase(std::string_view s, const std::set<std::string>& allowed,
                                                 bool multi) {
  static constexpr std::array<std::string_view, 12> kPhrases = {
      "答案是", "答案为", "答案应该是", "答案应为", "答案：", "答案:", "答案选", "故选",
      "answer is", "answer:", "answer would be", "answer should be"};
  const auto lower = ascii_lower(s);
  std::vector<std::pair<std::size_t, std::size_t>> hits;  // (position, phrase length)
  for (auto ph : kPhrases) {
    for (auto at = lower.find(ph); at != std::string::npos; at = lower.find(ph, at + 1)) hits.emplace_back(at, ph.size());
  }
  std::sort(hits.begin(), hits.end());
  for (const auto& [at, len] : hits) {
    std::size_t pos = at + len;
    auto labels = parse_label_list(s, pos, allowed, multi);
    if (labels.empty()) continue;
    if (pos < s.size() && ascii_alnum(s[pos])) continue;
    return labels;
  }
  return std::nullopt;
}

// True when only whitespace separates position i from the start of the text
// or from a sentence terminator.
bool sentence_start(std::string_view s, std::size_t i) {
  std::size_t k = i;
  while (k > 0 && (s[k - 1] == ' ' || s[k - 1] == '\t' || s[k - 1] == '\r')) --k;
  if (k == 0 || s[k - 1] == '.' || s[k - 1] == '!' || s[k - 1] == '?' || s[k - 1] == '\n') return true;
  for (std::string_view t : {"。", "！", "？", "：", ":"}) {
    if (s.substr(0, k).ends_with(t)) return true;
  }
  return false;
}

std::optional<std::set<std::string>> rule_unique(std::string_view s, const std::set<std::string>& allowed) {
  std::set<std::string> seen;
  for (std::size_t i = 0; i < s.size(); ++i) {
    const std::string l(1, s[i]);
    if (!allowed.contains(l)) continue;
    if (i > 0 && ascii_alnum(s[i - 1])) continue;
    if (i + 1 < s.size() && ascii_alnum(s[i + 1])) continue;
    // The English article opening a sentence: "A common cause ...".
    if (s[i] == 'A' && i + 2 < s.size() && s[i + 1] == ' ' && std::islower(static_cast<unsigned char>(s[i + 2])) &&
        sentence_start(s, i)) {
      continue;
    }
    seen.insert(l);
  }
  if (seen.size() != 1) return std::nullopt;
  return seen;
}

}  // namespace

Extraction extract_choice(std::string_view output, const std::set<std::string>& allowed, bool multi) {
  const auto text = fold_fullwidth(output);
  auto fits = [&](const std::optional<std::set<std::string>>& got) { return got && (multi || got->size() == 1); };
  if (auto got = rule_leading(text, allowed, multi); fits(got)) return {*got, ExtractRule::leading_label};
  if (auto got = rule_phrase(text, allowed, multi); fits(got)) return {*got, ExtractRule::answer_phrase};
  if (auto got = rule_unique(text, allowed); fits(got)) return {*got, ExtractRule::unique_mention};
  return {};
}

// ---------------------------------------------------------------------------
// Scoring

ScoreTable score(const std::vector<EvalItem>& items, const std::map<std::string, Extraction>& extractions,
                 MultiScoring rule) {
  ScoreTable t;
  for (const auto& item : items) {
    auto it = extractions.find(item.id);
    if (it == extractions.end()) throw ValidationError("score: no extraction for item " + item.id);
    const auto& ext = it->second;
    auto& sec = t.sections[item.section];
    ++sec.items;
    if (ext.abstained()) {
      ++t.abstentions;
      continue;
    }
    ++sec.parsed;
    if (ext.labels == item.gold) {
      sec.credit += 1.0;
    } else if (rule == MultiScoring::partial_credit && item.is_multi() &&
               std::includes(item.gold.begin(), item.gold.end(), ext.labels.begin(), ext.labels.end())) {
      sec.credit += static_cast<double>(ext.labels.size()) / static_cast<double>(item.gold.size());
    }
  }
  auto finish = [](SectionScore& s) {
    s.accuracy_all = s.items ? 100.0 * s.credit / static_cast<double>(s.items) : 0.0;
    s.accuracy_parsed = s.parsed ? 100.0 * s.credit / static_cast<double>(s.parsed) : 0.0;
  };
  double macro = 0.0;
  for (auto& [_, s] : t.sections) {
    finish(s);
    t.overall.items += s.items;
    t.overall.parsed += s.parsed;
    t.overall.credit += s.credit;
    macro += s.accuracy_all;
  }
  finish(t.overall);
  t.macro_accuracy = t.sections.empty() ? 0.0 : macro / static_cast<double>(t.sections.size());
  return t;
}

namespace {
nlohmann::json section_json(const SectionScore& s) {
  return {{"items", s.items},
          {"parsed", s.parsed},
          {"credit", s.credit},
          {"accuracy_all", s.accuracy_all},
          {"accuracy_parsed", s.accuracy_parsed}};
}
}  // namespace

void to_json(nlohmann::json& j, const ScoreTable& v) {
  nlohmann::json secs = nlohmann::json::object();
  for (const auto& [name, s] : v.sections) secs[name] = section_json(s);
  j = nlohmann::json{{"sections", secs},
                     {"overall", section_json(v.overall)},
                     {"macro_accuracy", v.macro_accuracy},
                     {"abstentions", v.abstentions}};
}

std::string render_score_table(const ScoreTable& t) {
  std::ostringstream os;
  os << "section\titems\tparsed\tacc_all\tacc_parsed\n";
  for (const auto& [name, s] : t.sections) {
    os << (name.empty() ? "(none)" : name) << '\t' << s.items << '\t' << s.parsed << '\t' << percent(s.accuracy_all)
       << '\t' << percent(s.accuracy_parsed) << '\n';
  }
  os << "total\t" << t.overall.items << '\t' << t.overall.parsed << '\t' << percent(t.overall.accuracy_all) << '\t'
     << percent(t.overall.accuracy_parsed) << '\n';
  os << "macro\t\t\t" << percent(t.macro_accuracy) << "\t\n";
  os << "abstentions\t" << t.abstentions << '\n';
  return os.str();
}

// ---------------------------------------------------------------------------
// Pairwise judging

std::string_view to_string(Orientation o) { return o == Orientation::AB ? "AB" : "BA"; }

std::string_view to_string(JudgeLabel l) {
  switch (l) {
    case JudgeLabel::first_better: return "first_better";
    case JudgeLabel::second_better: return "second_better";
    case JudgeLabel::equal: return "equal";
  }
  return "equal";
}

std::string_view to_string(Outcome o) {
  switch (o) {
    case Outcome::win: return "win";
    case Outcome::tie: return "tie";
    case Outcome::fail: return "fail";
  }
  return "tie";
}

std::optional<JudgeLabel> parse_judge_label(std::string_view reply) {
  std::size_t end = reply.size();
  std::string_view line;
  while (end > 0) {
    const auto nl = reply.rfind('\n', end - 1);
    const auto begin = nl == std::string_view::npos ? 0 : nl + 1;
    line = reply.substr(begin, end - begin);
    if (line.find_first_not_of(" \t\r") != std::string_view::npos) break;
    line = {};
    if (nl == std::string_view::npos) break;
    end = nl;
  }
  std::string norm;
  for (char c : ascii_lower(line)) {
    if (c == '`' || c == '*' || c == '"' || c == '\'') continue;
    norm.push_back(c);
  }
  struct Pattern {
    std::string_view text;
    JudgeLabel label;
  };
  static constexpr std::array<Pattern, 6> kPatterns = {{
      {"assistant 1 is better than assistant 2", JudgeLabel::first_better},
      {"assistant 1 is worse than assistant 2", JudgeLabel::second_better},
      {"assistant 1 is equal to assistant 2", JudgeLabel::equal},
      {"assistant 2 is worse than assistant 1", JudgeLabel::first_better},
      {"assistant 2 is better than assistant 1", JudgeLabel::second_better},
      {"assistant 2 is equal to assistant 1", JudgeLabel::equal},
  }};
  std::optional<JudgeLabel> found;
  for (const auto& p : kPatterns) {
    if (norm.find(p.text) == std::string::npos) continue;
    if (found && *found != p.label) return std::nullopt;
    found = p.label;
  }
  return found;
}

std::vector<JudgeCase> align_responses(const std::vector<std::pair<std::string, std::string>>& questions,
                                       const std::map<std::string, std::string>& responses1,
                                       const std::map<std::string, std::string>& responses2) {
  std::vector<JudgeCase> out;
  out.reserve(questions.size());
  for (const auto& [id, q] : questions) {
    auto a = responses1.find(id);
    auto b = responses2.find(id);
    if (a == responses1.end()) throw ValidationError("pairwise: model 1 has no response for " + id);
    if (b == responses2.end()) throw ValidationError("pairwise: model 2 has no response for " + id);
    out.push_back({id, q, a->second, b->second});
  }
  return out;
}

std::string render_judge_prompt(const JudgeCase& c, Orientation o, bool multi_round) {
  const auto& first = o == Orientation::AB ? c.response1 : c.response2;
  const auto& second = o == Orientation::AB ? c.response2 : c.response1;
  if (multi_round) {
    return render(builtin_template(TemplateName::judge_multi),
                  {{std::string(slot::kConversation1), first}, {std::string(slot::kConversation2), second}});
  }
  return render(builtin_template(TemplateName::judge_single), {{std::string(slot::kJudgeQuestion), c.question},
                                                               {std::string(slot::kResponse1), first},
                                                               {std::string(slot::kResponse2), second}});
}

namespace {

constexpr std::string_view kReask =
    "\n\nReply again, ending with a last line that contains only one of the three labels.";

JudgeVerdict judge_once(const JudgeCase& c, Orientation o, LlmBackend& judge, const PairwiseOptions& opt) {
  JudgeVerdict v;
  v.item_id = c.id;
  v.orientation = o;
  const auto prompt = render_judge_prompt(c, o, opt.multi_round);
  for (int attempt = 0; attempt < 2; ++attempt) {
    LlmRequest req;
    req.model_tag = judge.model_tag();
    req.prompt = attempt == 0 ? prompt : prompt + std::string(kReask);
    req.temperature = opt.temperature;
    req.max_output_tokens = opt.max_output_tokens;
    req.request_id = c.id + "/" + std::string(to_string(o)) + "/" + std::to_string(attempt);
    const auto resp = judge.complete(req);
    v.rationale = resp.text;
    if (resp.finish_reason == FinishReason::refused || resp.finish_reason == FinishReason::error) continue;
    if (auto label = parse_judge_label(resp.text)) {
      v.verdict = *label;
      return v;
    }
  }
  v.verdict = JudgeLabel::equal;
  v.unparsed = true;
  return v;
}

Outcome for_model1(const JudgeVerdict& v) {
  if (v.verdict == JudgeLabel::equal) return Outcome::tie;
  const bool first = v.verdict == JudgeLabel::first_better;
  const bool model1_first = v.orientation == Orientation::AB;
  return first == model1_first ? Outcome::win : Outcome::fail;
}

}  // namespace

ComparisonResult pairwise_judge(const std::vector<JudgeCase>& cases, LlmBackend& judge,
                                const PairwiseOptions& options) {
  if (options.in_flight == 0) throw ValidationError("pairwise: in_flight must be positive");
  ComparisonResult r;
  r.model1 = options.model1;
  r.model2 = options.model2;
  r.items.resize(cases.size());
  detail::parallel_for(cases.size(), options.in_flight, [&](std::size_t i) {
    auto& item = r.items[i];
    item.id = cases[i].id;
    item.ab = judge_once(cases[i], Orientation::AB, judge, options);
    item.ba = judge_once(cases[i], Orientation::BA, judge, options);
    item.flagged = item.ab.unparsed || item.ba.unparsed;
    const auto a = for_model1(item.ab);
    const auto b = for_model1(item.ba);
    item.outcome = item.flagged || a != b ? Outcome::tie : a;
  });
  for (const auto& item : r.items) {
    switch (item.outcome) {
      case Outcome::win: ++r.win; break;
      case Outcome::tie: ++r.tie; break;
      case Outcome::fail: ++r.fail; break;
    }
    if (item.flagged) ++r.flagged;
  }
  r.win_tie_rate = cases.empty() ? 0.0 : static_cast<double>(r.win + r.tie) / static_cast<double>(cases.size());
  return r;
}

void to_json(nlohmann::json& j, const ComparisonResult& v) {
  nlohmann::json items = nlohmann::json::array();
  auto verdict = [](const JudgeVerdict& x) {
    return nlohmann::json{{"orientation", to_string(x.orientation)},
                          {"verdict", to_string(x.verdict)},
                          {"unparsed", x.unparsed},
                          {"rationale", x.rationale}};
  };
  for (const auto& it : v.items) {
    items.push_back({{"id", it.id},
                     {"outcome", to_string(it.outcome)},
                     {"flagged", it.flagged},
                     {"verdicts", {verdict(it.ab), verdict(it.ba)}}});
  }
  j = nlohmann::json{{"model1", v.model1}, {"model2", v.model2}, {"win", v.win},
                     {"tie", v.tie},       {"fail", v.fail},     {"flagged", v.flagged},
                     {"win_tie_rate", v.win_tie_rate},           {"items", items}};
}

std::string render_comparison(const ComparisonResult& r) {
  const auto n = static_cast<double>(r.win + r.tie + r.fail);
  auto pct = [&](std::size_t k) { return n > 0 ? percent(100.0 * static_cast<double>(k) / n) : std::string("0.0"); };
  std::ostringstream os;
  os << "Model 1\tModel 2\tWin\tTie\tFail\tWin/Tie Rate\n";
  os << r.model1 << '\t' << r.model2 << '\t' << pct(r.win) << '\t' << pct(r.tie) << '\t' << pct(r.fail) << '\t'
     << percent(100.0 * r.win_tie_rate) << '\n';
  if (r.flagged) os << "flagged (unparseable judge output): " << r.flagged << '\n';
  return os.str();
}

// ---------------------------------------------------------------------------
// Simulated patient

std::size_t Transcript::doctor_messages() const {
  return static_cast<std::size_t>(
      std::count_if(turns.begin(), turns.end(), [](const ChatTurn& t) { return t.role == Role::assistant; }));
}

std::string render_transcript(const Transcript& t) {
  std::string out;
  for (const auto& turn : t.turns) {
    if (!out.empty()) out += '\n';
    out += turn.role == Role::user ? "患者：" : "医生：";
    out += turn.text;
  }
  return out;
}

Transcript simulate_patient_dialogue(std::string_view case_info, LlmBackend& doctor, LlmBackend& patient,
                                     const DialogueOptions& options) {
  if (case_info.find_first_not_of(" \t\r\n") == std::string_view::npos) {
    throw ValidationError("dialogue: empty case information");
  }
  if (options.turns == 0) throw ValidationError("dialogue: turns must be at least 1");
  const auto persona = render(builtin_template(TemplateName::sim_patient),
                              {{std::string(slot::kPatientCase), std::string(case_info)}});
  Transcript t;
  auto ask = [&](LlmBackend& backend, Role role, std::string prompt, std::size_t round) {
    LlmRequest req;
    req.model_tag = backend.model_tag();
    req.prompt = std::move(prompt);
    req.temperature = options.temperature;
    req.max_output_tokens = options.max_output_tokens;
    req.request_id = options.id + (role == Role::user ? "/patient/" : "/doctor/") + std::to_string(round);
    const auto resp = backend.complete(req);
    if (resp.finish_reason == FinishReason::refused || resp.finish_reason == FinishReason::error ||
        resp.text.empty()) {
      t.aborted = true;
      t.failure = std::string(role == Role::user ? "patient" : "doctor") + " " +
                  std::string(to_string(resp.finish_reason)) + " at round " + std::to_string(round);
      if (options.throw_on_failure) throw StageError("dialogue " + options.id + ": " + t.failure);
      return false;
    }
    t.turns.push_back({role, resp.text});
    return true;
  };
  for (std::size_t round = 0; round < options.turns; ++round) {
    std::string patient_prompt = persona;
    if (!t.turns.empty()) patient_prompt += "\n\n" + render_transcript(t);
    if (!ask(patient, Role::user, std::move(patient_prompt), round)) break;
    if (!ask(doctor, Role::assistant, render_transcript(t), round)) break;
  }
  return t;
}

void to_json(nlohmann::json& j, const Transcript& v) {
  j = nlohmann::json{{"turns", v.turns}, {"aborted", v.aborted}, {"failure", v.failure}};
}

}  // namespace unistage
