// Copyright 2026 The unistage Authors
// SPDX-License-Identifier: Apache-2.0

#include <benchmark/benchmark.h>

#include "unistage/fidelity.hpp"

namespace {

void BM_Jaccard1gram(benchmark::State& state) {
  const unistage::UnigramTokenizer tok;
  std::string a, b;
  for (int i = 0; i < state.range(0); ++i) {
    a += i % 3 ? "肝硬化患者常见腹水，" : "patients with ascites ";
    b += i % 4 ? "腹水是肝硬化的常见并发症。" : "albumin levels fall ";
  }
  for (auto _ : state) benchmark::DoNotOptimize(unistage::jaccard_1gram(a, b, tok));
  state.SetBytesProcessed(state.iterations() * static_cast<std::int64_t>(a.size() + b.size()));
}
BENCHMARK(BM_Jaccard1gram)->Arg(10)->Arg(200);

}  // namespace
