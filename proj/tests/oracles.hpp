// Copyright 2026 The unistage Authors
// SPDX-License-Identifier: Apache-2.0

// Reference implementations used as test oracles. They are deliberately
// naive (string sets, quadratic loops) and share no code with the library.

#pragma once

#include <algorithm>
#include <cctype>
#include <cstdint>
#include <random>
#include <set>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace oracle {

// Splits UTF-8 into code-point substrings by lead-byte length.
inline std::vector<std::string> code_points(std::string_view s) {
  std::vector<std::string> out;
  std::size_t i = 0;
  while (i < s.size()) {
    const auto b = static_cast<unsigned char>(s[i]);
    std::size_t len = 1;
    if (b >= 0xF0) {
      len = 4;
    } else if (b >= 0xE0) {
      len = 3;
    } else if (b >= 0xC0) {
      len = 2;
    }
    len = std::min(len, s.size() - i);
    out.emplace_back(s.substr(i, len));
    i += len;
  }
  return out;
}

// Character k-gram set; a text of at most k code points is one shingle.
inline std::set<std::string> shingles(std::string_view text, std::size_t k) {
  std::set<std::string> out;
  if (text.empty()) return out;
  const auto cps = code_points(text);
  if (cps.size() <= k) {
    out.emplace(text);
    return out;
  }
  for (std::size_t i = 0; i + k <= cps.size(); ++i) {
    std::string g;
    for (std::size_t m = 0; m < k; ++m) g += cps[i + m];
    out.insert(std::move(g));
  }
  return out;
}

inline double jaccard(const std::set<std::string>& a, const std::set<std::string>& b) {
  if (a.empty() && b.empty()) return 1.0;
  std::size_t inter = 0;
  for (const auto& x : a) inter += b.count(x);
  return static_cast<double>(inter) / static_cast<double>(a.size() + b.size() - inter);
}

// Greedy first-seen-wins over all pairs: a text is dropped when any earlier
// kept text reaches the threshold. Returns kept indices.
inline std::vector<std::size_t> brute_force_dedup(const std::vector<std::string>& texts, double threshold,
                                                  std::size_t k) {
  std::vector<std::set<std::string>> sh;
  for (const auto& t : texts) sh.push_back(shingles(t, k));
  std::vector<std::size_t> kept;
  for (std::size_t j = 0; j < texts.size(); ++j) {
    bool dup = false;
    for (auto i : kept) {
      if (jaccard(sh[i], sh[j]) >= threshold) {
        dup = true;
        break;
      }
    }
    if (!dup) kept.push_back(j);
  }
  return kept;
}

// 1-gram units: each CJK ideograph alone, ASCII letter/digit runs lowercased,
// everything else a separator. Only valid for ASCII plus CJK input.
inline std::set<std::string> unigram_set(std::string_view text) {
  std::set<std::string> out;
  std::string word;
  for (const auto& cp : code_points(text)) {
    if (cp.size() == 1 && std::isalnum(static_cast<unsigned char>(cp[0]))) {
      word.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(cp[0]))));
      continue;
    }
    if (!word.empty()) out.insert(std::exchange(word, {}));
    if (cp.size() == 3) {
      const auto b0 = static_cast<unsigned char>(cp[0]);
      const auto b1 = static_cast<unsigned char>(cp[1]);
      const unsigned v = ((b0 & 0x0Fu) << 12) | ((b1 & 0x3Fu) << 6) | (static_cast<unsigned char>(cp[2]) & 0x3Fu);
      if (v >= 0x4E00 && v <= 0x9FFF) out.insert(cp);
    }
  }
  if (!word.empty()) out.insert(word);
  return out;
}

inline double unigram_jaccard(std::string_view a, std::string_view b) {
  return jaccard(unigram_set(a), unigram_set(b));
}

// Random text over a large syllable alphabet so unrelated texts share
// almost no 5-grams.
inline std::string random_text(std::mt19937_64& rng, std::size_t code_points) {
  static const char* kChars[] = {"病", "症", "药", "医", "治", "疗", "肝", "肾", "心", "肺", "血", "糖",
                                 "压", "脉", "胃", "肠", "骨", "脑", "眼", "耳", "鼻", "喉", "皮", "肤",
                                 "感", "染", "炎", "热", "痛", "咳", "嗽", "痰", "喘", "疹", "癌", "瘤"};
  constexpr std::size_t kN = sizeof(kChars) / sizeof(kChars[0]);
  std::string out;
  for (std::size_t i = 0; i < code_points; ++i) out += kChars[rng() % kN];
  return out;
}

// Replaces `edits` random code points with a marker character.
inline std::string perturb(std::mt19937_64& rng, std::string_view text, std::size_t edits) {
  auto cps = code_points(text);
  for (std::size_t e = 0; e < edits && !cps.empty(); ++e) cps[rng() % cps.size()] = "X";
  std::string out;
  for (const auto& c : cps) out += c;
  return out;
}

}  // namespace oracle
