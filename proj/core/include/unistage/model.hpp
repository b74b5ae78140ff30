// Copyright 2026 The unistage Authors
// SPDX-License-Identifier: Apache-2.0

// Shared record types for every pipeline stage. All of them serialize to one
// JSON object per line with keys equal to the field names below.

#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

namespace unistage {

enum class Language { zh, en, other };
enum class DocClass { web, literature, encyclopedia, book };
enum class Origin { pretrain_unified, sft_native, general_chat };

std::string_view to_string(Language v);
std::string_view to_string(DocClass v);
std::string_view to_string(Origin v);

Language parse_language(std::string_view s);
DocClass parse_doc_class(std::string_view s);
Origin parse_origin(std::string_view s);

inline constexpr DocClass kAllDocClasses[] = {DocClass::web, DocClass::literature,
                                              DocClass::encyclopedia, DocClass::book};

struct Document {
  std::string id;
  std::string text;
  Language language = Language::other;
  DocClass doc_class = DocClass::web;
  std::string source_name;
  std::map<std::string, std::string> meta;

  friend bool operator==(const Document&, const Document&) = default;
};

// Byte offsets into the parent document text, half-open.
struct CharSpan {
  std::size_t start = 0;
  std::size_t end = 0;

  std::size_t size() const { return end - start; }
  friend bool operator==(const CharSpan&, const CharSpan&) = default;
};

struct Segment {
  std::string id;
  std::string parent_doc;
  std::uint32_t ordinal = 0;
  std::string text;
  CharSpan char_span;

  friend bool operator==(const Segment&, const Segment&) = default;
};

enum class Role { user, assistant };

struct ChatTurn {
  Role role = Role::user;
  std::string text;

  friend bool operator==(const ChatTurn&, const ChatTurn&) = default;
};

struct InstructionRecord {
  std::string id;
  std::string instruction;
  std::string output;
  Origin origin = Origin::sft_native;
  std::optional<DocClass> doc_class;
  std::optional<std::string> source_segment;
  std::optional<double> deviation_score;
  std::uint32_t attempts = 1;
  std::string model_tag;
  // Multi-turn general_chat records; empty for single-turn records.
  std::vector<ChatTurn> turns;

  friend bool operator==(const InstructionRecord&, const InstructionRecord&) = default;
};

// Field-level checks shared by readers and producers. Throw ValidationError.
void validate(const Document& doc);
void validate(const Segment& seg);
void validate(const Segment& seg, const Document& parent);
void validate(const InstructionRecord& rec, std::optional<double> acceptance_threshold = {});

// Content-addressed identifiers: the first 16 hex digits of SHA-256 over the
// parts joined by '\x1f'.
std::string content_id(std::initializer_list<std::string_view> parts);
std::string segment_id(std::string_view parent_doc, const CharSpan& span);

void to_json(nlohmann::json& j, const Document& v);
void from_json(const nlohmann::json& j, Document& v);
void to_json(nlohmann::json& j, const Segment& v);
void from_json(const nlohmann::json& j, Segment& v);
void to_json(nlohmann::json& j, const ChatTurn& v);
void from_json(const nlohmann::json& j, ChatTurn& v);
void to_json(nlohmann::json& j, const InstructionRecord& v);
void from_json(const nlohmann::json& j, InstructionRecord& v);

}  // namespace unistage
