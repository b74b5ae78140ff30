// Copyright 2026 The unistage Authors
// SPDX-License-Identifier: Apache-2.0

#include <benchmark/benchmark.h>

#include <random>

#include "unistage/dedup.hpp"

namespace {

std::vector<unistage::Segment> corpus(std::size_t n) {
  static const char* kChars[] = {"病", "症", "药", "医", "治", "疗", "肝", "肾", "心", "肺", "血", "糖",
                                 "压", "脉", "胃", "肠", "骨", "脑", "感", "染", "炎", "热", "痛", "咳"};
  std::mt19937_64 rng(1);
  std::vector<unistage::Segment> out;
  for (std::size_t i = 0; i < n; ++i) {
    unistage::Segment s;
    s.id = "s" + std::to_string(i);
    s.parent_doc = "d" + std::to_string(i);
    if (i % 5 == 4) {
      s.text = out[rng() % out.size()].text + "附";  // near-duplicate
    } else {
      for (int k = 0; k < 200; ++k) s.text += kChars[rng() % std::size(kChars)];
    }
    s.char_span = {0, s.text.size()};
    out.push_back(std::move(s));
  }
  return out;
}

void BM_DedupNgram(benchmark::State& state) {
  const auto segs = corpus(static_cast<std::size_t>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(unistage::deduplicate_ngram(segs, 0.8));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_DedupNgram)->Arg(500)->Arg(5000)->Unit(benchmark::kMillisecond);

void BM_DedupEmbedding(benchmark::State& state) {
  const auto segs = corpus(static_cast<std::size_t>(state.range(0)));
  const unistage::HashingEmbedder embedder;
  for (auto _ : state) benchmark::DoNotOptimize(unistage::deduplicate_embedding(segs, 0.95, embedder));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_DedupEmbedding)->Arg(500)->Unit(benchmark::kMillisecond);

}  // namespace
