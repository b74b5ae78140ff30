// Copyright 2026 The unistage Authors
// SPDX-License-Identifier: Apache-2.0

// Domain extraction, moving-window segmentation and quality cleaning.

#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <set>
#include <string>
#include <string_view>
#include <unordered_set>
#include <vector>

#include "unistage/model.hpp"
#include "unistage/text.hpp"

namespace unistage {

class DomainDictionary {
 public:
  // Normalizes, drops stoplisted terms and rejects terms shorter than
  // `min_term_length` code points. Throws ValidationError if nothing is left.
  static DomainDictionary from_terms(const std::vector<std::string>& terms,
                                     Normalization normalization = Normalization::lowercase_fold,
                                     std::size_t min_term_length = 1,
                                     const std::set<std::string>& stoplist = {});

  // One term per line, UTF-8, '#' starts a comment.
  static DomainDictionary load(const std::filesystem::path& path,
                               Normalization normalization = Normalization::lowercase_fold,
                               std::size_t min_term_length = 1,
                               const std::filesystem::path& stoplist = {});

  const std::set<std::string>& terms() const { return terms_; }
  Normalization normalization() const { return normalization_; }
  std::size_t min_term_length() const { return min_term_length_; }

 private:
  std::set<std::string> terms_;
  Normalization normalization_ = Normalization::lowercase_fold;
  std::size_t min_term_length_ = 1;
};

struct DensityReport {
  std::string doc_id;
  std::size_t matched_tokens = 0;
  std::size_t total_tokens = 1;
  double density = 0.0;
  // Set when the text produced no tokens; total_tokens is then 1 by convention.
  bool empty_text = false;
};

// Longest-match scanner over token streams. Multi-token terms (for example a
// Chinese word split per character) count every token they cover.
class DictionaryMatcher {
 public:
  DictionaryMatcher(const DomainDictionary& dict, const TextTokenizer& tokenizer);

  DensityReport score(const Document& doc) const;
  std::size_t matched_tokens(const std::vector<std::string>& tokens) const;

 private:
  const TextTokenizer& tokenizer_;
  std::unordered_set<std::string> sequences_;  // tokens joined by '\x1f'
  std::size_t max_len_ = 0;
};

DensityReport score_density(const Document& doc, const DomainDictionary& dict,
                            const TextTokenizer& tokenizer);

// Keeps documents whose density is at least `threshold`, in input order.
// When `reports` is non-null it receives one report per input document.
std::vector<Document> filter_domain(const std::vector<Document>& docs, const DomainDictionary& dict,
                                    const TextTokenizer& tokenizer, double threshold,
                                    std::vector<DensityReport>* reports = nullptr);

struct SegmentOptions {
  std::size_t window_limit = 1024;  // tokens
  std::size_t flank = 1;            // sentences shared with each neighbour
};

struct Segmentation {
  std::vector<Segment> segments;
  // Ordinals of segments made of a single sentence longer than the window.
  std::vector<std::uint32_t> overlong;
};

Segmentation segment(const Document& doc, const SegmentOptions& opts,
                     const SentenceSplitter& splitter, const TextTokenizer& tokenizer);

// Concatenates segments of one document with the overlaps removed.
std::string reconstruct(const std::vector<Segment>& segments);

class QualityJudge {
 public:
  virtual ~QualityJudge() = default;
  // Score in [0,1]; higher is cleaner. May throw, which the caller treats as
  // a judge failure.
  virtual double score(const Segment& seg) const = 0;
};

// Flags advertisement-like text from contact-information density, repeated
// word trigrams, promotional phrases and the symbol-to-letter ratio.
class HeuristicQualityJudge final : public QualityJudge {
 public:
  struct Features {
    double contact_density = 0.0;
    double repetition = 0.0;
    double promo_rate = 0.0;  // promotional phrase hits per 100 tokens
    double symbol_ratio = 0.0;
  };

  double score(const Segment& seg) const override;
  static Features features(std::string_view text);
  static double score_features(const Features& f);
};

class ConstantQualityJudge final : public QualityJudge {
 public:
  explicit ConstantQualityJudge(double value) : value_(value) {}
  double score(const Segment&) const override { return value_; }

 private:
  double value_;
};

struct CleanResult {
  std::vector<Segment> kept;
  std::vector<std::string> dropped;       // segment ids
  std::vector<std::string> judge_failed;  // kept and flagged
};

CleanResult clean(const std::vector<Segment>& segments, const QualityJudge& judge,
                  double threshold = 0.5);

void to_json(nlohmann::json& j, const DensityReport& v);

}  // namespace unistage
