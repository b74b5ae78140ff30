// Copyright 2026 The unistage Authors
// SPDX-License-Identifier: Apache-2.0

#include "unistage/text.hpp"

#include <algorithm>
#include <cctype>
#include <string>

#include "unistage/error.hpp"

namespace unistage {

std::string_view to_string(Normalization n) { return n == Normalization::lowercase_fold ? "lowercase_fold" : "none"; }

Normalization parse_normalization(std::string_view s) {
  if (s == "lowercase_fold") return Normalization::lowercase_fold;
  if (s == "none") return Normalization::none;
  throw ValidationError("unknown normalization '" + std::string(s) + "'");
}

std::vector<CodePoint> decode_utf8(std::string_view text) {
  std::vector<CodePoint> out;
  out.reserve(text.size());
  std::size_t i = 0;
  const auto n = text.size();
  while (i < n) {
    const auto b0 = static_cast<unsigned char>(text[i]);
    std::size_t len = 0;
    char32_t cp = 0;
    if (b0 < 0x80) {
      len = 1;
      cp = b0;
    } else if ((b0 & 0xE0) == 0xC0) {
      len = 2;
      cp = b0 & 0x1F;
    } else if ((b0 & 0xF0) == 0xE0) {
      len = 3;
      cp = b0 & 0x0F;
    } else if ((b0 & 0xF8) == 0xF0) {
      len = 4;
      cp = b0 & 0x07;
    }
    bool ok = len > 0 && i + len <= n;
    for (std::size_t k = 1; ok && k < len; ++k) {
      const auto b = static_cast<unsigned char>(text[i + k]);
      if ((b & 0xC0) != 0x80) {
        ok = false;
      } else {
        cp = (cp << 6) | (b & 0x3F);
      }
    }
    if (!ok) {
      out.push_back({0xFFFD, i, 1});
      ++i;
      continue;
    }
    out.push_back({cp, i, len});
    i += len;
  }
  return out;
}

void append_utf8(std::string& out, char32_t cp) {
  if (cp < 0x80) {
    out.push_back(static_cast<char>(cp));
  } else if (cp < 0x800) {
    out.push_back(static_cast<char>(0xC0 | (cp >> 6)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  } else if (cp < 0x10000) {
    out.push_back(static_cast<char>(0xE0 | (cp >> 12)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  } else {
    out.push_back(static_cast<char>(0xF0 | (cp >> 18)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 12) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  }
}

std::size_t count_code_points(std::string_view text) {
  return static_cast<std::size_t>(std::count_if(text.begin(), text.end(), [](char c) {
    return (static_cast<unsigned char>(c) & 0xC0) != 0x80;
  }));
}

bool is_cjk(char32_t cp) {
  return (cp >= 0x4E00 && cp <= 0x9FFF) || (cp >= 0x3400 && cp <= 0x4DBF) ||
         (cp >= 0xF900 && cp <= 0xFAFF) || (cp >= 0x20000 && cp <= 0x2FA1F) ||
         (cp >= 0x3040 && cp <= 0x30FF);
}

bool is_space(char32_t cp) {
  return cp == ' ' || cp == '\t' || cp == '\n' || cp == '\r' || cp == '\v' || cp == '\f' ||
         cp == 0x00A0 || cp == 0x3000 || (cp >= 0x2000 && cp <= 0x200B) || cp == 0xFEFF;
}

bool is_word_char(char32_t cp) {
  if (cp < 0x80) return std::isalnum(static_cast<int>(cp)) != 0;
  if (is_cjk(cp) || is_space(cp)) return false;
  // Fullwidth digits and Latin letters.
  if ((cp >= 0xFF10 && cp <= 0xFF19) || (cp >= 0xFF21 && cp <= 0xFF3A) ||
      (cp >= 0xFF41 && cp <= 0xFF5A)) {
    return true;
  }
  // Punctuation and symbol blocks.
  if (cp <= 0xBF || cp == 0xD7 || cp == 0xF7) return false;
  if ((cp >= 0x2000 && cp <= 0x2BFF) || (cp >= 0x3000 && cp <= 0x303F) ||
      (cp >= 0xFE30 && cp <= 0xFE4F) || (cp >= 0xFF00 && cp <= 0xFFEF) || cp == 0xFFFD) {
    return false;
  }
  // Latin-1 letters, Latin Extended, Greek, Cyrillic and similar alphabets.
  return true;
}

Language detect_language(std::string_view text) {
  std::size_t cjk = 0;
  std::size_t latin = 0;
  for (const auto& cp : decode_utf8(text)) {
    if (is_cjk(cp.value)) {
      ++cjk;
    } else if (cp.value < 0x80 && std::isalpha(static_cast<int>(cp.value))) {
      ++latin;
    }
  }
  if (cjk == 0 && latin == 0) return Language::other;
  // Four Latin letters per English word on average against one character per CJK token.
  return cjk * 4 >= latin ? Language::zh : Language::en;
}

namespace {

char32_t fold(char32_t cp) {
  if (cp >= 'A' && cp <= 'Z') return cp + ('a' - 'A');
  if (cp >= 0xFF21 && cp <= 0xFF3A) return cp - 0xFF21 + 'a';
  if (cp >= 0xFF41 && cp <= 0xFF5A) return cp - 0xFF41 + 'a';
  if (cp >= 0xFF10 && cp <= 0xFF19) return cp - 0xFF10 + '0';
  return cp;
}

template <typename Emit>
void scan_tokens(std::string_view text, Normalization norm, Emit&& emit) {
  std::string word;
  auto flush = [&] {
    if (!word.empty()) {
      emit(std::move(word));
      word.clear();
    }
  };
  for (const auto& cp : decode_utf8(text)) {
    if (is_cjk(cp.value)) {
      flush();
      std::string ch;
      append_utf8(ch, cp.value);
      emit(std::move(ch));
    } else if (is_word_char(cp.value)) {
      append_utf8(word, norm == Normalization::lowercase_fold ? fold(cp.value) : cp.value);
    } else {
      flush();
    }
  }
  flush();
}

}  // namespace

std::vector<std::string> UnigramTokenizer::tokenize(std::string_view text) const {
  std::vector<std::string> out;
  scan_tokens(text, norm_, [&](std::string&& tok) { out.push_back(std::move(tok)); });
  return out;
}

std::size_t UnigramTokenizer::count(std::string_view text) const {
  std::size_t n = 0;
  scan_tokens(text, norm_, [&](std::string&&) { ++n; });
  return n;
}

namespace {

const std::set<std::string>& default_abbreviations() {
  static const std::set<std::string> kAbbrev = {
      "dr",  "mr",   "mrs",  "ms",   "prof", "sr",  "jr",    "st",  "vs",   "fig",
      "figs", "no",  "al",   "e.g",  "i.e",  "cf",  "approx", "dept", "vol", "ed",
      "eds", "pp",   "inc",  "ltd",  "co",   "jan", "feb",   "mar", "apr",  "jun",
      "jul", "aug",  "sep",  "sept", "oct",  "nov", "dec",   "mg",  "ml",   "mm"};
  return kAbbrev;
}

bool is_cjk_terminator(char32_t cp) {
  return cp == U'。' || cp == U'！' || cp == U'？' || cp == U'；';
}

bool is_closer(char32_t cp) {
  return cp == '"' || cp == '\'' || cp == ')' || cp == ']' || cp == U'”' || cp == U'’' ||
         cp == U'）' || cp == U'】' || cp == U'」' || cp == U'』' || cp == U'》';
}

}  // namespace

RuleSentenceSplitter::RuleSentenceSplitter() : abbreviations_(default_abbreviations()) {}

RuleSentenceSplitter::RuleSentenceSplitter(std::set<std::string> abbreviations)
    : abbreviations_(std::move(abbreviations)) {}

std::vector<CharSpan> RuleSentenceSplitter::split(std::string_view text) const {
  const auto cps = decode_utf8(text);
  const auto n = cps.size();
  std::vector<CharSpan> spans;
  std::size_t sentence_start = 0;  // byte offset

  // The word immediately before index i, lowercased, with inner periods kept ("e.g").
  auto word_before = [&](std::size_t i) {
    std::size_t k = i;
    while (k > 0 && (is_word_char(cps[k - 1].value) ||
                     (cps[k - 1].value == '.' && k >= 2 && is_word_char(cps[k - 2].value)))) {
      --k;
    }
    std::string w;
    for (std::size_t m = k; m < i; ++m) append_utf8(w, fold(cps[m].value));
    return w;
  };

  auto ends_sentence = [&](std::size_t i) {
    const char32_t c = cps[i].value;
    if (c == '\n' || is_cjk_terminator(c)) return true;
    if (c != '.' && c != '!' && c != '?') return false;
    // ASCII terminators need whitespace, a closer or the end of text after them.
    std::size_t j = i + 1;
    while (j < n && (cps[j].value == '.' || cps[j].value == '!' || cps[j].value == '?')) ++j;
    while (j < n && is_closer(cps[j].value)) ++j;
    if (j < n && !is_space(cps[j].value)) return false;
    if (c == '.') {
      const auto w = word_before(i);
      if (abbreviations_.contains(w)) return false;
      if (w.size() == 1 && cps[i - 1].value < 0x80 &&
          std::isupper(static_cast<int>(cps[i - 1].value))) {
        return false;  // initial such as "J. Smith"
      }
    }
    return true;
  };

  std::size_t i = 0;
  while (i < n) {
    if (!ends_sentence(i)) {
      ++i;
      continue;
    }
    std::size_t j = i + 1;
    while (j < n && (cps[j].value == '.' || cps[j].value == '!' || cps[j].value == '?' ||
                     is_cjk_terminator(cps[j].value))) {
      ++j;
    }
    while (j < n && is_closer(cps[j].value)) ++j;
    while (j < n && is_space(cps[j].value)) ++j;
    const std::size_t end = j < n ? cps[j].offset : text.size();
    spans.push_back({sentence_start, end});
    sentence_start = end;
    i = j;
  }
  if (sentence_start < text.size()) spans.push_back({sentence_start, text.size()});
  return spans;
}

}  // namespace unistage
