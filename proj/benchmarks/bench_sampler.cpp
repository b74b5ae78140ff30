// Copyright 2026 The unistage Authors
// SPDX-License-Identifier: Apache-2.0

#include <benchmark/benchmark.h>

#include "unistage/sampler.hpp"

namespace {

std::vector<unistage::DataSource> sources(std::size_t per_source) {
  std::vector<unistage::DataSource> out;
  const std::uint32_t k[] = {5, 4, 3, 2, 0};
  for (std::size_t s = 0; s < std::size(k); ++s) {
    unistage::DataSource src;
    src.name = "s" + std::to_string(s);
    src.priority_exponent = k[s];
    for (std::size_t i = 0; i < per_source; ++i) src.items.push_back(src.name + "/" + std::to_string(i));
    out.push_back(std::move(src));
  }
  return out;
}

// Cost of one draw, exact integer path. Large beta moves the weights onto
// the arbitrary-precision fallback.
void BM_Draw(benchmark::State& state) {
  const auto src = sources(20'000);
  const auto beta = state.range(0) == 0 ? unistage::Beta::parse("2") : unistage::Beta::parse("1e12");
  unistage::SamplerState s(src, beta, 7);
  for (auto _ : state) {
    if (s.exhausted()) {
      state.PauseTiming();
      s = unistage::SamplerState(src, beta, 7);
      state.ResumeTiming();
    }
    benchmark::DoNotOptimize(s.draw());
  }
  state.SetLabel(state.range(0) == 0 ? "beta=2" : "beta=1e12 (bigint)");
}
BENCHMARK(BM_Draw)->Arg(0)->Arg(1);

void BM_BuildSchedule(benchmark::State& state) {
  const auto src = sources(static_cast<std::size_t>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(unistage::build_schedule(src, unistage::Beta::parse("2"), 7));
  state.SetItemsProcessed(state.iterations() * state.range(0) * 5);
}
BENCHMARK(BM_BuildSchedule)->Arg(2'000)->Arg(20'000)->Unit(benchmark::kMillisecond);

}  // namespace
