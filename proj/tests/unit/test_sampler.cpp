// Copyright 2026 The unistage Authors
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <algorithm>
#include <map>

#include "unistage/digest.hpp"
#include "unistage/error.hpp"
#include "unistage/sampler.hpp"

using namespace unistage;

namespace {

DataSource source(std::string name, std::uint32_t k, std::size_t n, std::uint32_t epochs = 1) {
  DataSource s;
  s.name = std::move(name);
  s.priority_exponent = k;
  for (std::size_t i = 0; i < n; ++i) s.items.push_back(s.name + "-" + std::to_string(i));
  s.epochs = epochs;
  return s;
}

// The 0.8 / 0.2 fixture: A has K=2 and 2 items, B has K=0 and 2 items, beta=2.
std::vector<DataSource> fixture_82() { return {source("A", 2, 2), source("B", 0, 2)}; }

}  // namespace

TEST_CASE("beta parsing is exact") {
  CHECK(Beta::parse("0.1") == Beta::ratio(1, 10));
  CHECK(Beta::parse("2.50") == Beta::ratio(5, 2));
  CHECK(Beta::parse("1e6") == Beta::ratio(1000000, 1));
  CHECK(Beta::parse("25e-1") == Beta::ratio(5, 2));
  CHECK(Beta::parse("0").is_zero());
  CHECK(Beta::from_double(0.3) == Beta::ratio(3, 10));
  CHECK(Beta::ratio(4, 6).str() == "2/3");
  CHECK_THROWS_AS(Beta::parse("-1"), ValidationError);
  CHECK_THROWS_AS(Beta::parse("abc"), ValidationError);
  CHECK_THROWS_AS(Beta::parse("1.2.3"), ValidationError);
  // str() output parses back.
  CHECK(Beta::parse("5/2") == Beta::ratio(5, 2));
  CHECK(Beta::parse(Beta::ratio(2, 3).str()) == Beta::ratio(2, 3));
  CHECK_THROWS_AS(Beta::parse("5/0"), ValidationError);
  CHECK_THROWS_AS(Beta::parse("5/"), ValidationError);
  CHECK_THROWS_AS(Beta::parse("1.5/2"), ValidationError);
}

TEST_CASE("default priorities by document class") {
  CHECK(default_priority(DocClass::web) == 5);
  CHECK(default_priority(DocClass::literature) == 4);
  CHECK(default_priority(DocClass::encyclopedia) == 3);
  CHECK(default_priority(DocClass::book) == 2);
  CHECK(kFineTuningPriority == 0);
  CHECK(kPretrainEpochs == 3);
  CHECK(kFineTuningEpochs == 1);
}

TEST_CASE("single source has probability one") {
  SamplerState s({source("only", 3, 5)}, Beta::parse("2"), 1);
  CHECK(s.source_probability(0) == 1.0);
  CHECK(s.source_probability_exact(0) == Rational(1));
}

TEST_CASE("the 0.8 fixture evaluates exactly") {
  SamplerState s(fixture_82(), Beta::parse("2"), 1);
  // 2*2^2 / (2*2^2 + 2*2^0)
  CHECK(s.source_probability_exact(0) == Rational(8, 10));
  CHECK(s.source_probability_exact(1) == Rational(2, 10));
  CHECK(s.source_probability(0) == doctest::Approx(0.8));
}

TEST_CASE("beta one is proportional mixing whatever the exponents") {
  SamplerState s({source("a", 5, 3), source("b", 0, 7), source("c", 2, 10)}, Beta::parse("1"), 1);
  CHECK(s.source_probability_exact(0) == Rational(3, 20));
  CHECK(s.source_probability_exact(1) == Rational(7, 20));
  CHECK(s.source_probability_exact(2) == Rational(10, 20));
}

TEST_CASE("one-item pool: forced draw then exhausted") {
  SamplerState s({source("x", 1, 1)}, Beta::parse("2"), 9);
  const auto d = s.draw();
  CHECK(d.record_id == "x-0");
  CHECK(d.step == 0);
  CHECK(s.exhausted());
  CHECK(s.total_remaining() == 0);
  CHECK_THROWS_AS(s.draw(), PoolExhausted);
  CHECK_THROWS_AS(s.source_probability(0), PoolExhausted);
}

TEST_CASE("Monte Carlo first draws on the 0.8 fixture") {
  SamplerState s(fixture_82(), Beta::parse("2"), 1);
  std::mt19937_64 rng(20240501);
  constexpr int kDraws = 1000000;
  int a = 0;
  for (int i = 0; i < kDraws; ++i) a += s.choose_source(rng) == 0;
  CHECK(std::abs(static_cast<double>(a) / kDraws - 0.8) <= 0.004);
}

TEST_CASE("two singleton sources: first draw favors K=1 two to one") {
  // Enumeration: weights 1*2^1 and 1*2^0, so P = 2/3.
  const double exact = 2.0 / 3.0;
  int hits = 0;
  constexpr int kSeeds = 100000;
  const auto sources = std::vector<DataSource>{source("hi", 1, 1), source("lo", 0, 1)};
  for (int seed = 0; seed < kSeeds; ++seed) {
    SamplerState s(sources, Beta::parse("2"), static_cast<std::uint64_t>(seed));
    hits += s.draw().source == 0;
  }
  CHECK(std::abs(static_cast<double>(hits) / kSeeds - exact) <= 0.005);
}

TEST_CASE("schedules are multiset permutations of the replicated pool") {
  const std::vector<DataSource> sources{source("a", 3, 13, 3), source("b", 0, 29, 1), source("c", 1, 7, 2)};
  const auto sched = build_schedule(sources, Beta::parse("2"), 4);
  std::map<std::string, int> expected;
  for (const auto& s : sources) {
    for (const auto& it : s.items) expected[it] += static_cast<int>(s.epochs);
  }
  std::map<std::string, int> got;
  for (const auto& e : sched.entries) ++got[e.record_id];
  CHECK(got == expected);
  for (std::size_t i = 0; i < sched.entries.size(); ++i) CHECK(sched.entries[i].step == i);
  CHECK(sched.summary.totals == std::vector<std::uint64_t>{39, 29, 14});
}

TEST_CASE("same inputs and seed give the same schedule") {
  const std::vector<DataSource> sources{source("a", 3, 50), source("b", 0, 80)};
  const auto a = build_schedule(sources, Beta::parse("2"), 77);
  const auto b = build_schedule(sources, Beta::parse("2"), 77);
  const auto c = build_schedule(sources, Beta::parse("2"), 78);
  auto ids = [](const Schedule& s) {
    std::vector<std::string> v;
    for (const auto& e : s.entries) v.push_back(e.record_id);
    return v;
  };
  CHECK(ids(a) == ids(b));
  CHECK(ids(a) != ids(c));
}

TEST_CASE("resuming from a saved state continues the same schedule") {
  const std::vector<DataSource> sources{source("a", 2, 40), source("b", 1, 30), source("c", 0, 20)};
  const auto full = build_schedule(sources, Beta::parse("1.5"), 11);
  SamplerState s(sources, Beta::parse("1.5"), 11);
  std::vector<std::string> order;
  for (int i = 0; i < 37; ++i) order.push_back(s.draw().record_id);
  auto restored = SamplerState::from_json(nlohmann::json::parse(s.to_json().dump()));
  CHECK(restored.step() == 37);
  const auto rest = continue_schedule(restored);
  for (const auto& e : rest.entries) order.push_back(e.record_id);
  REQUIRE(order.size() == full.entries.size());
  for (std::size_t i = 0; i < order.size(); ++i) CHECK(order[i] == full.entries[i].record_id);
}

TEST_CASE("probabilities of the drawn source strictly decrease") {
  const std::vector<DataSource> sources{source("a", 4, 30), source("b", 2, 25), source("c", 0, 40)};
  SamplerState s(sources, Beta::parse("3"), 5);
  int violations = 0;
  while (s.total_remaining() > 0) {
    std::vector<Rational> before;
    for (std::size_t i = 0; i < s.num_sources(); ++i) before.push_back(s.source_probability_exact(i));
    const auto d = s.draw();
    std::size_t others = 0;
    for (std::size_t i = 0; i < s.num_sources(); ++i) {
      if (i != d.source) others += s.remaining(i);
    }
    if (others == 0 || s.total_remaining() == 0) continue;
    if (!(s.source_probability_exact(d.source) < before[d.source])) ++violations;
  }
  CHECK(violations == 0);
}

TEST_CASE("mix curve at step zero equals the source probability") {
  const auto sources = fixture_82();
  SamplerState s(sources, Beta::parse("2"), 1);
  const auto curve = expected_mix_curve(sources, Beta::parse("2"));
  REQUIRE(!curve.probabilities.empty());
  CHECK(curve.steps[0] == 0);
  CHECK(curve.probabilities[0][0] == s.source_probability(0));
  CHECK(curve.probabilities[0][1] == s.source_probability(1));
  CHECK(curve.steps.size() == 4);
}

TEST_CASE("mix curve degenerate cases") {
  const auto one = expected_mix_curve({source("x", 4, 10)}, Beta::parse("2"));
  for (const auto& p : one.probabilities) CHECK(p[0] == 1.0);
  const auto two = expected_mix_curve({source("a", 5, 10), source("b", 0, 10)}, Beta::parse("1"));
  for (const auto& p : two.probabilities) {
    CHECK(p[0] == doctest::Approx(0.5));
    CHECK(p[1] == doctest::Approx(0.5));
  }
  const auto strided = expected_mix_curve({source("a", 1, 10), source("b", 0, 10)}, Beta::parse("2"), {}, 5);
  CHECK(strided.steps == std::vector<std::uint64_t>{0, 5, 10, 15});
}

TEST_CASE("beta zero defaults to uniform priorities") {
  const std::vector<DataSource> sources{source("a", 3, 20), source("b", 0, 30)};
  SamplerState zero(sources, Beta::parse("0"), 3);
  CHECK(zero.beta_zero_aliased());
  CHECK(zero.source_probability_exact(0) == Rational(2, 5));
  const auto a = build_schedule(sources, Beta::parse("0"), 3);
  const auto b = build_schedule(sources, Beta::parse("1"), 3);
  REQUIRE(a.entries.size() == b.entries.size());
  for (std::size_t i = 0; i < a.entries.size(); ++i) CHECK(a.entries[i].record_id == b.entries[i].record_id);
}

TEST_CASE("strict beta zero freezes sources with positive exponents") {
  const std::vector<DataSource> sources{source("a", 3, 20), source("b", 0, 30)};
  SamplerState strict(sources, Beta::parse("0"), 3, {ZeroBeta::strict});
  CHECK_FALSE(strict.beta_zero_aliased());
  CHECK(strict.source_probability_exact(1) == Rational(1));
  const auto sched = build_schedule(sources, Beta::parse("0"), 3, {ZeroBeta::strict});
  CHECK(sched.entries.size() == 30);
  CHECK(sched.summary.frozen == std::vector<std::uint64_t>{20, 0});
  CHECK_FALSE(sched.summary.completion_step[0].has_value());
}

TEST_CASE("huge priorities take the arbitrary-precision path") {
  // 1e12^6 is far beyond 128 bits.
  const std::vector<DataSource> sources{source("a", 6, 3), source("b", 0, 5)};
  SamplerState s(sources, Beta::parse("1e12"), 1);
  const Rational expected(BigInt(3) * boost::multiprecision::pow(BigInt(1000000000000ull), 6),
                          BigInt(3) * boost::multiprecision::pow(BigInt(1000000000000ull), 6) + 5);
  CHECK(s.source_probability_exact(0) == expected);
  const auto sched = build_schedule(sources, Beta::parse("1e12"), 1);
  for (int i = 0; i < 3; ++i) CHECK(sched.entries[static_cast<std::size_t>(i)].source == 0);
}

TEST_CASE("block-sequential order has tau one, reversed has minus one") {
  std::vector<ScheduleEntry> fwd;
  std::vector<ScheduleEntry> rev;
  for (std::uint64_t i = 0; i < 10; ++i) fwd.push_back({i, i < 5 ? 0u : 1u, ""});
  for (std::uint64_t i = 0; i < 10; ++i) rev.push_back({i, i < 5 ? 1u : 0u, ""});
  const auto rank = priority_ranks({5, 2});
  CHECK(rank == std::vector<int>{0, 1});
  CHECK(sequential_order_tau(fwd, rank) == 1.0);
  CHECK(sequential_order_tau(rev, rank) == -1.0);
  CHECK(priority_ranks({3, 5, 3, 0}) == std::vector<int>{1, 0, 1, 2});
}

TEST_CASE("higher beta is more sequential") {
  const std::vector<DataSource> sources{source("w", 5, 60), source("l", 4, 60), source("b", 2, 60), source("s", 0, 60)};
  const auto rows = beta_sweep(sources, {Beta::parse("1"), Beta::parse("2"), Beta::parse("1000000")}, 8);
  REQUIRE(rows.size() == 3);
  CHECK(rows[0].tau < rows[1].tau);
  CHECK(rows[1].tau < rows[2].tau);
  CHECK(rows[2].tau >= 0.99);
}

TEST_CASE("summary bins and completion steps") {
  const auto sched = build_schedule({source("a", 1, 10), source("b", 0, 10)}, Beta::parse("2"), 2, {}, 4);
  REQUIRE(sched.summary.bins.size() == 4);
  CHECK(sched.summary.bins.back().end_step == 20);
  CHECK(sched.summary.bins.back().cumulative == std::vector<std::uint64_t>{10, 10});
  std::uint64_t last_a = 0;
  for (const auto& e : sched.entries) {
    if (e.source == 0) last_a = e.step;
  }
  CHECK(sched.summary.completion_step[0] == last_a);
}

TEST_CASE("invalid sources are rejected") {
  CHECK_THROWS_AS(SamplerState({}, Beta::parse("2"), 1), ValidationError);
  CHECK_THROWS_AS(SamplerState({source("e", 1, 0)}, Beta::parse("2"), 1), ValidationError);
  CHECK_THROWS_AS(SamplerState({source("", 1, 2)}, Beta::parse("2"), 1), ValidationError);
}
