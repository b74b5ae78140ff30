// Copyright 2026 The unistage Authors
// SPDX-License-Identifier: Apache-2.0

#include "unistage/model.hpp"

#include <algorithm>
#include <array>
#include <initializer_list>

#include "unistage/digest.hpp"
#include "unistage/error.hpp"

namespace unistage {

namespace {

template <typename E, std::size_t N>
E parse_enum(std::string_view s, const std::array<std::pair<std::string_view, E>, N>& table,
             std::string_view what) {
  for (const auto& [name, value] : table) {
    if (name == s) return value;
  }
  throw ValidationError("unknown " + std::string(what) + " '" + std::string(s) + "'");
}

constexpr std::array<std::pair<std::string_view, Language>, 3> kLanguages{
    {{"zh", Language::zh}, {"en", Language::en}, {"other", Language::other}}};
constexpr std::array<std::pair<std::string_view, DocClass>, 4> kDocClasses{
    {{"web", DocClass::web},
     {"literature", DocClass::literature},
     {"encyclopedia", DocClass::encyclopedia},
     {"book", DocClass::book}}};
constexpr std::array<std::pair<std::string_view, Origin>, 3> kOrigins{
    {{"pretrain_unified", Origin::pretrain_unified},
     {"sft_native", Origin::sft_native},
     {"general_chat", Origin::general_chat}}};

// Rejects unknown keys and reports missing required ones by name.
void check_keys(const nlohmann::json& j, std::initializer_list<std::string_view> required,
                std::initializer_list<std::string_view> optional, std::string_view type) {
  if (!j.is_object()) throw ValidationError(std::string(type) + ": expected a JSON object");
  for (const auto& [key, _] : j.items()) {
    const bool known = std::find(required.begin(), required.end(), key) != required.end() ||
                       std::find(optional.begin(), optional.end(), key) != optional.end();
    if (!known) throw ValidationError(std::string(type) + ": unknown key '" + key + "'");
  }
  for (auto key : required) {
    if (!j.contains(key)) {
      throw ValidationError(std::string(type) + ": missing key '" + std::string(key) + "'");
    }
  }
}

}  // namespace

std::string_view to_string(Language v) { return kLanguages[static_cast<std::size_t>(v)].first; }
std::string_view to_string(DocClass v) { return kDocClasses[static_cast<std::size_t>(v)].first; }
std::string_view to_string(Origin v) { return kOrigins[static_cast<std::size_t>(v)].first; }

Language parse_language(std::string_view s) { return parse_enum(s, kLanguages, "language"); }
DocClass parse_doc_class(std::string_view s) { return parse_enum(s, kDocClasses, "doc_class"); }
Origin parse_origin(std::string_view s) { return parse_enum(s, kOrigins, "origin"); }

void validate(const Document& doc) {
  if (doc.id.empty()) throw ValidationError("document: empty id");
  if (doc.text.empty()) throw ValidationError("document " + doc.id + ": empty text");
}

void validate(const Segment& seg) {
  if (seg.id.empty()) throw ValidationError("segment: empty id");
  if (seg.parent_doc.empty()) throw ValidationError("segment " + seg.id + ": empty parent_doc");
  if (seg.char_span.end < seg.char_span.start) {
    throw ValidationError("segment " + seg.id + ": inverted char_span");
  }
  if (seg.char_span.size() != seg.text.size()) {
    throw ValidationError("segment " + seg.id + ": char_span length does not match text");
  }
}

void validate(const Segment& seg, const Document& parent) {
  validate(seg);
  if (seg.parent_doc != parent.id) {
    throw ValidationError("segment " + seg.id + ": parent mismatch");
  }
  if (seg.char_span.end > parent.text.size() ||
      parent.text.compare(seg.char_span.start, seg.char_span.size(), seg.text) != 0) {
    throw ValidationError("segment " + seg.id + ": char_span outside parent text");
  }
}

void validate(const InstructionRecord& rec, std::optional<double> acceptance_threshold) {
  if (rec.id.empty()) throw ValidationError("record: empty id");
  if (rec.instruction.empty() || rec.output.empty()) {
    throw ValidationError("record " + rec.id + ": empty instruction or output");
  }
  if (rec.attempts < 1) throw ValidationError("record " + rec.id + ": attempts < 1");
  if (rec.deviation_score && (*rec.deviation_score < 0.0 || *rec.deviation_score > 1.0)) {
    throw ValidationError("record " + rec.id + ": deviation_score outside [0,1]");
  }
  if (rec.origin == Origin::pretrain_unified) {
    if (!rec.doc_class) throw ValidationError("record " + rec.id + ": pretrain_unified without doc_class");
    if (!rec.deviation_score) {
      throw ValidationError("record " + rec.id + ": pretrain_unified without deviation_score");
    }
    if (acceptance_threshold && *rec.deviation_score < *acceptance_threshold) {
      throw ValidationError("record " + rec.id + ": deviation_score below acceptance threshold");
    }
  }
}

std::string content_id(std::initializer_list<std::string_view> parts) {
  Sha256 h;
  bool first = true;
  for (auto p : parts) {
    if (!first) h.update("\x1f");
    h.update(p);
    first = false;
  }
  return h.hex_digest().substr(0, 16);
}

std::string segment_id(std::string_view parent_doc, const CharSpan& span) {
  const auto start = std::to_string(span.start);
  const auto end = std::to_string(span.end);
  return content_id({parent_doc, start, end});
}

void to_json(nlohmann::json& j, const Document& v) {
  j = nlohmann::json{{"id", v.id},
                     {"text", v.text},
                     {"language", to_string(v.language)},
                     {"doc_class", to_string(v.doc_class)},
                     {"source_name", v.source_name},
                     {"meta", v.meta}};
}

void from_json(const nlohmann::json& j, Document& v) {
  check_keys(j, {"id", "text", "doc_class"}, {"language", "source_name", "meta"}, "document");
  v.id = j.at("id").get<std::string>();
  v.text = j.at("text").get<std::string>();
  v.doc_class = parse_doc_class(j.at("doc_class").get<std::string>());
  v.language = j.contains("language") ? parse_language(j["language"].get<std::string>())
                                      : Language::other;
  v.source_name = j.value("source_name", std::string{});
  v.meta = j.value("meta", std::map<std::string, std::string>{});
  validate(v);
}

void to_json(nlohmann::json& j, const Segment& v) {
  j = nlohmann::json{{"id", v.id},
                     {"parent_doc", v.parent_doc},
                     {"ordinal", v.ordinal},
                     {"text", v.text},
                     {"char_span", {v.char_span.start, v.char_span.end}}};
}

void from_json(const nlohmann::json& j, Segment& v) {
  check_keys(j, {"id", "parent_doc", "ordinal", "text", "char_span"}, {}, "segment");
  v.id = j.at("id").get<std::string>();
  v.parent_doc = j.at("parent_doc").get<std::string>();
  v.ordinal = j.at("ordinal").get<std::uint32_t>();
  v.text = j.at("text").get<std::string>();
  const auto& span = j.at("char_span");
  if (!span.is_array() || span.size() != 2) throw ValidationError("segment: char_span must be [start, end]");
  v.char_span = {span[0].get<std::size_t>(), span[1].get<std::size_t>()};
  validate(v);
}

void to_json(nlohmann::json& j, const ChatTurn& v) {
  j = nlohmann::json{{"role", v.role == Role::user ? "user" : "assistant"}, {"text", v.text}};
}

void from_json(const nlohmann::json& j, ChatTurn& v) {
  check_keys(j, {"role", "text"}, {}, "turn");
  const auto role = j.at("role").get<std::string>();
  if (role == "user") {
    v.role = Role::user;
  } else if (role == "assistant") {
    v.role = Role::assistant;
  } else {
    throw ValidationError("turn: unknown role '" + role + "'");
  }
  v.text = j.at("text").get<std::string>();
}

void to_json(nlohmann::json& j, const InstructionRecord& v) {
  j = nlohmann::json{{"id", v.id},
                     {"instruction", v.instruction},
                     {"output", v.output},
                     {"origin", to_string(v.origin)},
                     {"attempts", v.attempts},
                     {"model_tag", v.model_tag}};
  if (v.doc_class) j["doc_class"] = to_string(*v.doc_class);
  if (v.source_segment) j["source_segment"] = *v.source_segment;
  if (v.deviation_score) j["deviation_score"] = *v.deviation_score;
  if (!v.turns.empty()) j["turns"] = v.turns;
}

void from_json(const nlohmann::json& j, InstructionRecord& v) {
  check_keys(j, {"id", "instruction", "output", "origin"},
             {"doc_class", "source_segment", "deviation_score", "attempts", "model_tag", "turns"},
             "record");
  v.id = j.at("id").get<std::string>();
  v.instruction = j.at("instruction").get<std::string>();
  v.output = j.at("output").get<std::string>();
  v.origin = parse_origin(j.at("origin").get<std::string>());
  v.doc_class.reset();
  v.source_segment.reset();
  v.deviation_score.reset();
  if (j.contains("doc_class") && !j["doc_class"].is_null()) {
    v.doc_class = parse_doc_class(j["doc_class"].get<std::string>());
  }
  if (j.contains("source_segment") && !j["source_segment"].is_null()) {
    v.source_segment = j["source_segment"].get<std::string>();
  }
  if (j.contains("deviation_score") && !j["deviation_score"].is_null()) {
    v.deviation_score = j["deviation_score"].get<double>();
  }
  v.attempts = j.value("attempts", 1u);
  v.model_tag = j.value("model_tag", std::string{});
  v.turns = j.value("turns", std::vector<ChatTurn>{});
  validate(v);
}

}  // namespace unistage
