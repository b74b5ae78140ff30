// Copyright 2026 The unistage Authors
// SPDX-License-Identifier: Apache-2.0

#include "unistage/dedup.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <unordered_map>

#include "unistage/error.hpp"
#include "unistage/text.hpp"

namespace unistage {

std::string_view to_string(DedupMethod m) {
  return m == DedupMethod::ngram_jaccard ? "ngram_jaccard" : "embedding";
}

DedupMethod parse_dedup_method(std::string_view s) {
  if (s == "ngram_jaccard" || s == "ngram") return DedupMethod::ngram_jaccard;
  if (s == "embedding") return DedupMethod::embedding;
  throw ValidationError("unknown dedup method '" + std::string(s) + "'");
}

namespace {

constexpr std::uint64_t kFnvOffset = 0xcbf29ce484222325ull;
constexpr std::uint64_t kFnvPrime = 0x100000001b3ull;

std::uint64_t fnv1a(std::string_view bytes) {
  std::uint64_t h = kFnvOffset;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= kFnvPrime;
  }
  return h;
}

std::uint64_t mix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

std::vector<std::uint64_t> minhash(const std::vector<std::uint64_t>& shingles,
                                   const ShingleOptions& opts) {
  std::vector<std::uint64_t> sig(opts.num_permutations, std::numeric_limits<std::uint64_t>::max());
  for (std::size_t p = 0; p < opts.num_permutations; ++p) {
    const std::uint64_t salt = mix64(opts.seed + p);
    for (auto s : shingles) sig[p] = std::min(sig[p], mix64(s ^ salt));
  }
  return sig;
}

void check_threshold(double threshold) {
  if (!(threshold > 0.0 && threshold <= 1.0)) {
    throw ValidationError("dedup threshold must lie in (0, 1]");
  }
}

// Records `dropped` against the kept segment at `kept_index`, keeping
// decisions ordered by the kept segment's position.
struct DecisionLog {
  std::map<std::size_t, DedupDecision> by_kept;

  void add(std::size_t kept_index, const std::string& kept_id, const std::string& dropped,
           double sim, DedupMethod method) {
    auto& d = by_kept[kept_index];
    d.kept = kept_id;
    d.method = method;
    d.dropped.push_back(dropped);
    d.similarity.push_back(sim);
  }

  std::vector<DedupDecision> take() {
    std::vector<DedupDecision> out;
    out.reserve(by_kept.size());
    for (auto& [_, d] : by_kept) out.push_back(std::move(d));
    return out;
  }
};

}  // namespace

std::vector<std::uint64_t> shingle_hashes(std::string_view text, std::size_t k) {
  std::vector<std::uint64_t> out;
  if (text.empty()) return out;
  const auto cps = decode_utf8(text);
  if (k == 0 || cps.size() <= k) {
    out.push_back(fnv1a(text));
    return out;
  }
  out.reserve(cps.size() - k + 1);
  for (std::size_t i = 0; i + k <= cps.size(); ++i) {
    const auto begin = cps[i].offset;
    const auto end = cps[i + k - 1].offset + cps[i + k - 1].length;
    out.push_back(fnv1a(text.substr(begin, end - begin)));
  }
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

double jaccard_sorted(const std::vector<std::uint64_t>& a, const std::vector<std::uint64_t>& b) {
  if (a.empty() && b.empty()) return 1.0;
  std::size_t inter = 0;
  auto ia = a.begin();
  auto ib = b.begin();
  while (ia != a.end() && ib != b.end()) {
    if (*ia < *ib) {
      ++ia;
    } else if (*ib < *ia) {
      ++ib;
    } else {
      ++inter;
      ++ia;
      ++ib;
    }
  }
  const auto uni = a.size() + b.size() - inter;
  return static_cast<double>(inter) / static_cast<double>(uni);
}

std::size_t rows_per_band(double threshold, std::size_t num_permutations) {
  std::size_t best = 1;
  for (std::size_t r = 1; r <= num_permutations; r *= 2) {
    if (num_permutations % r != 0) break;
    const double bands = static_cast<double>(num_permutations / r);
    const double miss = std::pow(1.0 - std::pow(threshold, static_cast<double>(r)), bands);
    if (miss <= 1e-6) best = r;
  }
  return best;
}

DedupResult deduplicate_ngram(const std::vector<Segment>& segments, double threshold,
                              const ShingleOptions& opts) {
  check_threshold(threshold);
  if (opts.num_permutations == 0) throw ValidationError("dedup: num_permutations must be positive");
  const std::size_t rows = rows_per_band(threshold, opts.num_permutations);
  const std::size_t bands = opts.num_permutations / rows;

  std::vector<std::vector<std::uint64_t>> shingles;
  shingles.reserve(segments.size());
  for (const auto& s : segments) shingles.push_back(shingle_hashes(s.text, opts.shingle_size));

  // band index -> band hash -> kept segment indices (ascending)
  std::vector<std::unordered_map<std::uint64_t, std::vector<std::size_t>>> buckets(bands);
  DedupResult out;
  DecisionLog log;
  std::vector<std::size_t> candidates;

  for (std::size_t j = 0; j < segments.size(); ++j) {
    const auto sig = minhash(shingles[j], opts);
    std::vector<std::uint64_t> keys(bands);
    candidates.clear();
    for (std::size_t b = 0; b < bands; ++b) {
      std::uint64_t h = mix64(b);
      for (std::size_t r = 0; r < rows; ++r) h = mix64(h ^ sig[b * rows + r]);
      keys[b] = h;
      if (auto it = buckets[b].find(h); it != buckets[b].end()) {
        candidates.insert(candidates.end(), it->second.begin(), it->second.end());
      }
    }
    std::sort(candidates.begin(), candidates.end());
    candidates.erase(std::unique(candidates.begin(), candidates.end()), candidates.end());

    double best = -1.0;
    std::size_t best_idx = 0;
    for (auto c : candidates) {
      ++out.candidate_pairs;
      const double sim = jaccard_sorted(shingles[c], shingles[j]);
      if (sim > best) {
        best = sim;
        best_idx = c;
      }
    }
    if (best >= threshold) {
      log.add(best_idx, segments[best_idx].id, segments[j].id, best, DedupMethod::ngram_jaccard);
      continue;
    }
    for (std::size_t b = 0; b < bands; ++b) buckets[b][keys[b]].push_back(j);
    out.kept.push_back(segments[j]);
  }
  out.decisions = log.take();
  return out;
}

std::vector<float> HashingEmbedder::embed(std::string_view text) const {
  std::vector<float> v(dim_, 0.0f);
  const auto cps = decode_utf8(text);
  const std::size_t k = std::max<std::size_t>(1, ngram_);
  if (cps.size() < k) {
    if (!text.empty()) v[fnv1a(text) % dim_] += 1.0f;
  } else {
    for (std::size_t i = 0; i + k <= cps.size(); ++i) {
      const auto begin = cps[i].offset;
      const auto end = cps[i + k - 1].offset + cps[i + k - 1].length;
      const auto h = fnv1a(text.substr(begin, end - begin));
      v[h % dim_] += (h >> 63) ? 1.0f : -1.0f;
    }
  }
  double norm = 0.0;
  for (float x : v) norm += static_cast<double>(x) * x;
  if (norm > 0.0) {
    const auto inv = static_cast<float>(1.0 / std::sqrt(norm));
    for (auto& x : v) x *= inv;
  }
  return v;
}

DedupResult deduplicate_embedding(const std::vector<Segment>& segments, double threshold,
                                  const Embedder& embedder) {
  check_threshold(threshold);
  DedupResult out;
  DecisionLog log;
  std::vector<std::vector<float>> kept_vecs;
  std::vector<std::size_t> kept_index;
  for (std::size_t j = 0; j < segments.size(); ++j) {
    auto v = embedder.embed(segments[j].text);
    double best = -2.0;
    std::size_t best_k = 0;
    for (std::size_t k = 0; k < kept_vecs.size(); ++k) {
      ++out.candidate_pairs;
      double dot = 0.0;
      const auto& u = kept_vecs[k];
      const std::size_t d = std::min(u.size(), v.size());
      for (std::size_t m = 0; m < d; ++m) dot += static_cast<double>(u[m]) * v[m];
      if (dot > best) {
        best = dot;
        best_k = k;
      }
    }
    if (best >= threshold) {
      const auto idx = kept_index[best_k];
      log.add(idx, segments[idx].id, segments[j].id, std::clamp(best, 0.0, 1.0), DedupMethod::embedding);
      continue;
    }
    kept_vecs.push_back(std::move(v));
    kept_index.push_back(j);
    out.kept.push_back(segments[j]);
  }
  out.decisions = log.take();
  return out;
}

DedupResult deduplicate(const std::vector<Segment>& segments, DedupMethod method, double threshold,
                        const Embedder* embedder, const ShingleOptions& opts) {
  if (method == DedupMethod::ngram_jaccard) return deduplicate_ngram(segments, threshold, opts);
  if (embedder) return deduplicate_embedding(segments, threshold, *embedder);
  const HashingEmbedder fallback;
  return deduplicate_embedding(segments, threshold, fallback);
}

void to_json(nlohmann::json& j, const DedupDecision& v) {
  j = nlohmann::json{
      {"kept", v.kept}, {"dropped", v.dropped}, {"similarity", v.similarity}, {"method", to_string(v.method)}};
}

}  // namespace unistage
