// Copyright 2026 The unistage Authors
// SPDX-License-Identifier: Apache-2.0

#include "unistage/curation.hpp"

#include <algorithm>
#include <array>
#include <fstream>
#include <unordered_set>

#include "unistage/error.hpp"

namespace unistage {

namespace {

std::string join_tokens(const std::vector<std::string>& tokens, std::size_t from, std::size_t len) {
  std::string key;
  for (std::size_t k = 0; k < len; ++k) {
    if (k) key.push_back('\x1f');
    key += tokens[from + k];
  }
  return key;
}

std::string normalize_term(std::string_view term, Normalization norm) {
  std::string out;
  for (const auto& cp : decode_utf8(term)) {
    char32_t c = cp.value;
    if (norm == Normalization::lowercase_fold && c >= 'A' && c <= 'Z') c += 'a' - 'A';
    append_utf8(out, c);
  }
  const auto first = out.find_first_not_of(" \t\r");
  if (first == std::string::npos) return {};
  const auto last = out.find_last_not_of(" \t\r");
  return out.substr(first, last - first + 1);
}

std::vector<std::string> read_term_lines(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open dictionary " + path.string());
  std::vector<std::string> terms;
  std::string line;
  while (std::getline(in, line)) {
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    terms.push_back(line);
  }
  return terms;
}

}  // namespace

DomainDictionary DomainDictionary::from_terms(const std::vector<std::string>& terms,
                                              Normalization normalization,
                                              std::size_t min_term_length,
                                              const std::set<std::string>& stoplist) {
  if (min_term_length == 0) throw ValidationError("dictionary: min_term_length must be positive");
  std::set<std::string> stop;
  for (const auto& s : stoplist) stop.insert(normalize_term(s, normalization));

  DomainDictionary dict;
  dict.normalization_ = normalization;
  dict.min_term_length_ = min_term_length;
  for (const auto& raw : terms) {
    auto term = normalize_term(raw, normalization);
    if (term.empty() || count_code_points(term) < min_term_length || stop.contains(term)) continue;
    dict.terms_.insert(std::move(term));
  }
  if (dict.terms_.empty()) throw ValidationError("dictionary: no usable terms");
  return dict;
}

DomainDictionary DomainDictionary::load(const std::filesystem::path& path,
                                        Normalization normalization, std::size_t min_term_length,
                                        const std::filesystem::path& stoplist) {
  std::set<std::string> stop;
  if (!stoplist.empty()) {
    for (auto& s : read_term_lines(stoplist)) stop.insert(std::move(s));
  }
  return from_terms(read_term_lines(path), normalization, min_term_length, stop);
}

DictionaryMatcher::DictionaryMatcher(const DomainDictionary& dict, const TextTokenizer& tokenizer)
    : tokenizer_(tokenizer) {
  for (const auto& term : dict.terms()) {
    const auto toks = tokenizer.tokenize(term);
    if (toks.empty()) continue;
    max_len_ = std::max(max_len_, toks.size());
    sequences_.insert(join_tokens(toks, 0, toks.size()));
  }
}

std::size_t DictionaryMatcher::matched_tokens(const std::vector<std::string>& tokens) const {
  std::size_t matched = 0;
  std::size_t i = 0;
  while (i < tokens.size()) {
    std::size_t hit = 0;
    for (std::size_t len = std::min(max_len_, tokens.size() - i); len > 0; --len) {
      if (sequences_.contains(join_tokens(tokens, i, len))) {
        hit = len;
        break;
      }
    }
    if (hit) {
      matched += hit;
      i += hit;
    } else {
      ++i;
    }
  }
  return matched;
}

DensityReport DictionaryMatcher::score(const Document& doc) const {
  DensityReport r;
  r.doc_id = doc.id;
  const auto tokens = tokenizer_.tokenize(doc.text);
  if (tokens.empty()) {
    r.empty_text = true;
    r.total_tokens = 1;
    r.matched_tokens = 0;
    r.density = 0.0;
    return r;
  }
  r.total_tokens = tokens.size();
  r.matched_tokens = matched_tokens(tokens);
  r.density = static_cast<double>(r.matched_tokens) / static_cast<double>(r.total_tokens);
  return r;
}

DensityReport score_density(const Document& doc, const DomainDictionary& dict,
                            const TextTokenizer& tokenizer) {
  return DictionaryMatcher(dict, tokenizer).score(doc);
}

std::vector<Document> filter_domain(const std::vector<Document>& docs, const DomainDictionary& dict,
                                    const TextTokenizer& tokenizer, double threshold,
                                    std::vector<DensityReport>* reports) {
  if (!(threshold >= 0.0 && threshold <= 1.0)) {
    throw ValidationError("density threshold must lie in [0, 1]");
  }
  const DictionaryMatcher matcher(dict, tokenizer);
  std::vector<Document> kept;
  for (const auto& doc : docs) {
    auto rep = matcher.score(doc);
    if (rep.density >= threshold) kept.push_back(doc);
    if (reports) reports->push_back(std::move(rep));
  }
  return kept;
}

Segmentation segment(const Document& doc, const SegmentOptions& opts,
                     const SentenceSplitter& splitter, const TextTokenizer& tokenizer) {
  if (opts.window_limit == 0) throw ValidationError("segment: window_limit must be positive");
  const auto sentences = splitter.split(doc.text);
  const auto n = sentences.size();
  std::vector<std::size_t> tokens(n);
  for (std::size_t k = 0; k < n; ++k) {
    const auto& s = sentences[k];
    tokens[k] = tokenizer.count(std::string_view(doc.text).substr(s.start, s.size()));
  }
  auto sum = [&](std::size_t from, std::size_t to) {
    std::size_t t = 0;
    for (std::size_t k = from; k < to; ++k) t += tokens[k];
    return t;
  };

  Segmentation out;
  std::size_t start = 0;
  while (start < n) {
    std::size_t end = start;
    std::size_t used = 0;
    while (end < n && used + tokens[end] <= opts.window_limit) used += tokens[end++];
    const bool overlong = end == start;
    if (overlong) end = start + 1;

    const CharSpan span{sentences[start].start, sentences[end - 1].end};
    Segment seg;
    seg.parent_doc = doc.id;
    seg.ordinal = static_cast<std::uint32_t>(out.segments.size());
    seg.char_span = span;
    seg.text = doc.text.substr(span.start, span.size());
    seg.id = segment_id(doc.id, span);
    if (overlong) out.overlong.push_back(seg.ordinal);
    out.segments.push_back(std::move(seg));
    if (end == n) break;

    // The next window repeats up to `flank` trailing sentences, shrinking the
    // repeat when it would push the first new sentence past the limit.
    std::size_t next = std::max(start + 1, end > opts.flank ? end - opts.flank : 0);
    while (next < end && sum(next, end) + tokens[end] > opts.window_limit) ++next;
    start = next;
  }
  return out;
}

std::string reconstruct(const std::vector<Segment>& segments) {
  std::string out;
  std::size_t covered = 0;  // end offset already emitted
  for (const auto& seg : segments) {
    if (out.empty() && covered == 0) {
      out = seg.text;
      covered = seg.char_span.end;
      continue;
    }
    if (seg.char_span.end <= covered) continue;
    const std::size_t skip = covered > seg.char_span.start ? covered - seg.char_span.start : 0;
    out.append(seg.text, skip);
    covered = seg.char_span.end;
  }
  return out;
}

namespace {

bool is_digit_cp(char32_t c) { return (c >= '0' && c <= '9') || (c >= 0xFF10 && c <= 0xFF19); }

bool is_phone_joiner(char32_t c) {
  return c == '-' || c == ' ' || c == '(' || c == ')' || c == '+' || c == '.' || c == 0xFF0D;
}

bool is_plain_punct(char32_t c) {
  static constexpr std::u32string_view kPunct =
      U".,;:!?'\"()-/%、，。；：！？“”‘’（）《》【】…—·";
  return kPunct.find(c) != std::u32string_view::npos;
}

std::string ascii_lower(std::string_view s) {
  std::string out(s);
  for (auto& c : out) {
    if (c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
  }
  return out;
}

std::size_t count_occurrences(std::string_view hay, std::string_view needle) {
  std::size_t n = 0;
  for (auto pos = hay.find(needle); pos != std::string_view::npos;
       pos = hay.find(needle, pos + needle.size())) {
    ++n;
  }
  return n;
}

constexpr std::array<std::string_view, 30> kPromoPhrases = {
    "免费咨询", "咨询热线", "热线", "电话", "微信", "加微", "优惠", "特价", "折扣", "包治",
    "根治", "无效退款", "抢购", "点击", "限时", "qq", "call now", "buy now", "order now",
    "limited offer", "click here", "free trial", "free consultation", "discount", "guaranteed",
    "best price", "whatsapp", "hotline", "special offer", "act now"};

}  // namespace

HeuristicQualityJudge::Features HeuristicQualityJudge::features(std::string_view text) {
  Features f;
  const auto cps = decode_utf8(text);
  if (cps.empty()) return f;

  // Contact information: phone-like digit runs, URLs and e-mail addresses.
  std::size_t contact_bytes = 0;
  std::size_t i = 0;
  while (i < cps.size()) {
    if (!is_digit_cp(cps[i].value)) {
      ++i;
      continue;
    }
    std::size_t j = i;
    std::size_t digits = 0;
    std::size_t last_digit = i;
    while (j < cps.size() && (is_digit_cp(cps[j].value) || is_phone_joiner(cps[j].value))) {
      if (is_digit_cp(cps[j].value)) {
        ++digits;
        last_digit = j;
      }
      ++j;
    }
    if (digits >= 7) {
      contact_bytes += cps[last_digit].offset + cps[last_digit].length - cps[i].offset;
    }
    i = last_digit + 1;
  }
  const std::string lower = ascii_lower(text);
  for (std::string_view prefix : {"http://", "https://", "www."}) {
    for (auto pos = lower.find(prefix); pos != std::string::npos; pos = lower.find(prefix, pos + 1)) {
      auto end = lower.find_first_of(" \t\r\n", pos);
      if (end == std::string::npos) end = lower.size();
      contact_bytes += end - pos;
      pos = end;
      if (pos >= lower.size()) break;
    }
  }
  for (auto at = lower.find('@'); at != std::string::npos; at = lower.find('@', at + 1)) {
    const auto end = lower.find_first_of(" \t\r\n", at);
    const auto dot = lower.find('.', at);
    if (dot != std::string::npos && (end == std::string::npos || dot < end)) {
      const auto start = lower.find_last_of(" \t\r\n", at);
      contact_bytes += (end == std::string::npos ? lower.size() : end) -
                       (start == std::string::npos ? 0 : start + 1);
    }
  }
  f.contact_density = std::min(1.0, static_cast<double>(contact_bytes) / static_cast<double>(text.size()));

  const UnigramTokenizer tok;
  const auto tokens = tok.tokenize(text);
  if (tokens.size() >= 12) {
    std::unordered_set<std::string> distinct;
    const std::size_t grams = tokens.size() - 2;
    for (std::size_t k = 0; k < grams; ++k) distinct.insert(join_tokens(tokens, k, 3));
    f.repetition = 1.0 - static_cast<double>(distinct.size()) / static_cast<double>(grams);
  }

  std::size_t promo = 0;
  for (auto phrase : kPromoPhrases) promo += count_occurrences(lower, phrase);
  f.promo_rate = 100.0 * static_cast<double>(promo) / static_cast<double>(std::max<std::size_t>(tokens.size(), 20));

  std::size_t letters = 0;
  std::size_t symbols = 0;
  for (const auto& cp : cps) {
    if (is_cjk(cp.value) || is_word_char(cp.value)) {
      ++letters;
    } else if (!is_space(cp.value) && !is_plain_punct(cp.value)) {
      ++symbols;
    }
  }
  f.symbol_ratio = static_cast<double>(symbols) / static_cast<double>(std::max<std::size_t>(letters, 1));
  return f;
}

double HeuristicQualityJudge::score_features(const Features& f) {
  auto ramp = [](double x, double lo, double hi) { return std::clamp((x - lo) / (hi - lo), 0.0, 1.0); };
  const double contact = ramp(f.contact_density, 0.05, 0.35);
  const double repeat = ramp(f.repetition, 0.3, 0.7);
  const double promo = ramp(f.promo_rate, 1.0, 6.0);
  const double symbol = ramp(f.symbol_ratio, 0.2, 0.7);
  return (1.0 - contact) * (1.0 - repeat) * (1.0 - promo) * (1.0 - symbol);
}

double HeuristicQualityJudge::score(const Segment& seg) const {
  return score_features(features(seg.text));
}

CleanResult clean(const std::vector<Segment>& segments, const QualityJudge& judge, double threshold) {
  CleanResult out;
  for (const auto& seg : segments) {
    double s = 0.0;
    bool failed = false;
    try {
      s = judge.score(seg);
      failed = !(s >= 0.0 && s <= 1.0);
    } catch (const std::exception&) {
      failed = true;
    }
    if (failed) {
      out.judge_failed.push_back(seg.id);
      out.kept.push_back(seg);
    } else if (s >= threshold) {
      out.kept.push_back(seg);
    } else {
      out.dropped.push_back(seg.id);
    }
  }
  return out;
}

void to_json(nlohmann::json& j, const DensityReport& v) {
  j = nlohmann::json{{"doc_id", v.doc_id},
                     {"matched_tokens", v.matched_tokens},
                     {"total_tokens", v.total_tokens},
                     {"density", v.density},
                     {"empty_text", v.empty_text}};
}

}  // namespace unistage
