// Copyright 2026 The unistage Authors
// SPDX-License-Identifier: Apache-2.0

// UTF-8 helpers, word-level tokenization and sentence splitting.

#pragma once

#include <cstddef>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "unistage/model.hpp"

namespace unistage {

struct CodePoint {
  char32_t value = 0;
  std::size_t offset = 0;  // byte offset of the first unit
  std::size_t length = 0;  // byte length; invalid bytes decode to U+FFFD with length 1
};

std::vector<CodePoint> decode_utf8(std::string_view text);
void append_utf8(std::string& out, char32_t cp);
std::size_t count_code_points(std::string_view text);

bool is_cjk(char32_t cp);
bool is_space(char32_t cp);
// Letters and digits across the scripts the tokenizer knows about, excluding CJK.
bool is_word_char(char32_t cp);

// Best-effort script guess: zh when CJK code points outnumber word characters.
Language detect_language(std::string_view text);

enum class Normalization { lowercase_fold, none };

std::string_view to_string(Normalization n);
Normalization parse_normalization(std::string_view s);

// Splits text into the 1-gram units used for dictionary density, fidelity
// Jaccard and segmentation windows.
class TextTokenizer {
 public:
  virtual ~TextTokenizer() = default;
  virtual std::vector<std::string> tokenize(std::string_view text) const = 0;
  virtual std::size_t count(std::string_view text) const { return tokenize(text).size(); }
};

// zh: one token per CJK character. en and the rest: maximal runs of word
// characters. Whitespace and punctuation separate tokens and are dropped.
class UnigramTokenizer final : public TextTokenizer {
 public:
  explicit UnigramTokenizer(Normalization norm = Normalization::lowercase_fold) : norm_(norm) {}

  std::vector<std::string> tokenize(std::string_view text) const override;
  std::size_t count(std::string_view text) const override;
  Normalization normalization() const { return norm_; }

 private:
  Normalization norm_;
};

class SentenceSplitter {
 public:
  virtual ~SentenceSplitter() = default;
  // Returns spans that tile [0, text.size()) in order with no gaps.
  virtual std::vector<CharSpan> split(std::string_view text) const = 0;
};

// Terminal punctuation for zh (。！？；) and en (.!?), plus line breaks.
// A period after a known abbreviation, a single-letter initial or inside a
// number does not end a sentence. Trailing closers and whitespace stay with
// the sentence they follow.
class RuleSentenceSplitter final : public SentenceSplitter {
 public:
  RuleSentenceSplitter();
  explicit RuleSentenceSplitter(std::set<std::string> abbreviations);

  std::vector<CharSpan> split(std::string_view text) const override;

 private:
  std::set<std::string> abbreviations_;
};

}  // namespace unistage
