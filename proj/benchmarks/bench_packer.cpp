// Copyright 2026 The unistage Authors
// SPDX-License-Identifier: Apache-2.0

#include <benchmark/benchmark.h>

#include <random>

#include "unistage/packer.hpp"

namespace {

void BM_Pack(benchmark::State& state) {
  std::mt19937_64 rng(3);
  std::vector<unistage::InstructionRecord> records;
  for (std::int64_t i = 0; i < state.range(0); ++i) {
    unistage::InstructionRecord r;
    r.id = "r" + std::to_string(i);
    r.instruction = std::string(1 + rng() % 300, 'q');
    r.output = std::string(1 + rng() % 1200, 'a');
    records.push_back(std::move(r));
  }
  const unistage::DeskTokenizer tok;
  for (auto _ : state) benchmark::DoNotOptimize(unistage::pack(records, tok, 4096));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_Pack)->Arg(10'000)->Unit(benchmark::kMillisecond);

}  // namespace
