// Copyright 2026 The unistage Authors
// SPDX-License-Identifier: Apache-2.0

// Near-duplicate removal over segments, greedy first-seen-wins.

#pragma once

#include <cstddef>
#include <cstdint>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

#include "unistage/model.hpp"

namespace unistage {

enum class DedupMethod { ngram_jaccard, embedding };

std::string_view to_string(DedupMethod m);
DedupMethod parse_dedup_method(std::string_view s);

struct DedupDecision {
  std::string kept;
  std::vector<std::string> dropped;
  std::vector<double> similarity;  // parallel to `dropped`
  DedupMethod method = DedupMethod::ngram_jaccard;
};

struct DedupResult {
  std::vector<Segment> kept;
  std::vector<DedupDecision> decisions;  // one per kept segment that absorbed duplicates
  std::size_t candidate_pairs = 0;       // exact comparisons performed
};

struct ShingleOptions {
  std::size_t shingle_size = 5;  // code points
  std::size_t num_permutations = 64;
  std::uint64_t seed = 0x5eed'0f'd3d0'0ull;
};

// Sorted, unique 64-bit hashes of the code-point k-grams of `text`. Texts
// shorter than k contribute one shingle holding the whole text.
std::vector<std::uint64_t> shingle_hashes(std::string_view text, std::size_t k);

// |A∩B| / |A∪B| over sorted unique vectors; 1.0 when both are empty.
double jaccard_sorted(const std::vector<std::uint64_t>& a, const std::vector<std::uint64_t>& b);

// Number of rows per band such that a pair at `threshold` Jaccard becomes a
// candidate with probability at least 1 - 1e-6 under the ideal MinHash model.
std::size_t rows_per_band(double threshold, std::size_t num_permutations);

// Character-shingle Jaccard with MinHash banding as the candidate filter.
// Every candidate is verified with the exact Jaccard before a drop.
DedupResult deduplicate_ngram(const std::vector<Segment>& segments, double threshold,
                              const ShingleOptions& opts = {});

class Embedder {
 public:
  virtual ~Embedder() = default;
  // Unit-norm vector; all vectors from one embedder share a dimension.
  virtual std::vector<float> embed(std::string_view text) const = 0;
};

// Feature-hashed character trigram counts, L2-normalized. Offline stand-in
// for a sentence-embedding model.
class HashingEmbedder final : public Embedder {
 public:
  explicit HashingEmbedder(std::size_t dim = 512, std::size_t ngram = 3) : dim_(dim), ngram_(ngram) {}
  std::vector<float> embed(std::string_view text) const override;

 private:
  std::size_t dim_;
  std::size_t ngram_;
};

// Cosine similarity against every kept segment; same threshold semantics.
DedupResult deduplicate_embedding(const std::vector<Segment>& segments, double threshold,
                                  const Embedder& embedder);

DedupResult deduplicate(const std::vector<Segment>& segments, DedupMethod method, double threshold,
                        const Embedder* embedder = nullptr, const ShingleOptions& opts = {});

void to_json(nlohmann::json& j, const DedupDecision& v);

}  // namespace unistage
