// Copyright 2026 The unistage Authors
// SPDX-License-Identifier: Apache-2.0

// Priority sampling without replacement over heterogeneous data sources.
//
// Every item of source i carries the static priority beta^K_i. At step t the
// next item comes from source i with probability
//
//     |D_i^t| * beta^K_i / sum_j |D_j^t| * beta^K_j
//
// where |D_i^t| is the number of items of source i not yet drawn. Within a
// source the item is uniform among those remaining. Source selection uses
// exact integer weights, so schedules are reproducible across platforms.

#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <boost/multiprecision/cpp_int.hpp>
#include <nlohmann/json.hpp>

#include "unistage/model.hpp"

namespace unistage {

using BigInt = boost::multiprecision::cpp_int;
using Rational = boost::multiprecision::cpp_rational;

// Non-negative rational relative priority, parsed from a decimal string so
// that "0.1" is exactly 1/10.
class Beta {
 public:
  Beta() = default;
  static Beta parse(std::string_view text);  // decimal, scientific or "p/q"
  // Uses the shortest decimal representation that round-trips the double.
  static Beta from_double(double v);
  static Beta ratio(std::uint64_t num, std::uint64_t den);

  std::uint64_t numerator() const { return num_; }
  std::uint64_t denominator() const { return den_; }
  double value() const { return static_cast<double>(num_) / static_cast<double>(den_); }
  bool is_zero() const { return num_ == 0; }
  std::string str() const;

  friend bool operator==(const Beta&, const Beta&) = default;

 private:
  std::uint64_t num_ = 2;
  std::uint64_t den_ = 1;
};

// How beta = 0 is read: as uniform priorities (same as beta = 1), or
// literally, which gives every source with K > 0 a zero weight.
enum class ZeroBeta { as_uniform, strict };

inline constexpr std::uint32_t kFineTuningPriority = 0;
inline constexpr std::uint32_t kPretrainEpochs = 3;
inline constexpr std::uint32_t kFineTuningEpochs = 1;

// web 5, literature 4, encyclopedia 3, book 2.
std::uint32_t default_priority(DocClass c);

struct DataSource {
  std::string name;
  std::uint32_t priority_exponent = 0;
  std::vector<std::string> items;
  std::uint32_t epochs = 1;
};

void validate(const DataSource& src);

struct SamplerOptions {
  ZeroBeta zero_beta = ZeroBeta::as_uniform;
};

struct Draw {
  std::uint64_t step = 0;
  std::size_t source = 0;
  std::string record_id;
};

// Shared double-precision form of the source probabilities. `remaining` and
// `exponents` are parallel; returns all zeros when every weight is zero.
std::vector<double> mix_probabilities(std::span<const double> remaining, std::span<const std::uint32_t> exponents,
                                      double beta);

class SamplerState {
 public:
  SamplerState(const std::vector<DataSource>& sources, Beta beta, std::uint64_t seed, SamplerOptions opts = {});

  std::size_t num_sources() const { return names_.size(); }
  const std::string& name(std::size_t i) const { return names_.at(i); }
  std::uint32_t exponent(std::size_t i) const { return exponents_.at(i); }
  std::size_t remaining(std::size_t i) const { return pools_.at(i).size(); }
  std::size_t total_remaining() const;
  std::uint64_t step() const { return step_; }
  std::uint64_t seed() const { return seed_; }
  const Beta& beta() const { return beta_; }
  // Beta actually used for weights (1 when beta = 0 is read as uniform).
  const Beta& effective_beta() const { return effective_; }
  bool beta_zero_aliased() const { return beta_.is_zero() && !effective_.is_zero(); }

  // Throws PoolExhausted when no item has positive weight.
  double source_probability(std::size_t i) const;
  std::vector<double> probabilities() const;
  Rational source_probability_exact(std::size_t i) const;
  BigInt total_weight() const;

  // True when no remaining item can be drawn (pool empty, or only
  // zero-weight sources left under strict beta = 0).
  bool exhausted() const;

  // Picks a source with the exact weights using `rng`; does not mutate.
  std::size_t choose_source(std::mt19937_64& rng) const;

  // Draws the next item with the state's own generator.
  Draw draw();

  nlohmann::json to_json() const;
  static SamplerState from_json(const nlohmann::json& j);

 private:
  SamplerState() = default;
  void init_weights();
  std::size_t choose_source_impl(std::mt19937_64& rng) const;

  std::vector<std::string> names_;
  std::vector<std::uint32_t> exponents_;
  std::vector<std::vector<std::string>> pools_;
  Beta beta_;
  Beta effective_;
  SamplerOptions opts_;
  std::uint64_t seed_ = 0;
  std::uint64_t step_ = 0;
  std::mt19937_64 rng_;

  std::vector<BigInt> units_;             // beta^K scaled to integers
  __extension__ typedef unsigned __int128 u128_t;
  std::vector<u128_t> units128_;
  bool fast_ = false;                     // all weights fit in 127 bits
};

struct ScheduleEntry {
  std::uint64_t step = 0;
  std::size_t source = 0;
  std::string record_id;
};

struct PrefixBin {
  std::uint64_t end_step = 0;             // exclusive
  std::vector<std::uint64_t> counts;      // draws per source inside the bin
  std::vector<std::uint64_t> cumulative;  // draws per source in [0, end_step)
};

struct ScheduleSummary {
  std::vector<std::string> sources;
  std::vector<std::uint32_t> exponents;
  std::vector<std::uint64_t> totals;
  // Step of the last draw from each source; empty if it never completed.
  std::vector<std::optional<std::uint64_t>> completion_step;
  std::vector<PrefixBin> bins;
  // Items left undrawable (strict beta = 0 only).
  std::vector<std::uint64_t> frozen;
};

struct Schedule {
  std::vector<std::string> source_names;
  std::vector<ScheduleEntry> entries;
  ScheduleSummary summary;
};

// Replicates each source's items `epochs` times and samples the whole pool.
// Throws ValidationError on invalid sources.
Schedule build_schedule(const std::vector<DataSource>& sources, Beta beta, std::uint64_t seed,
                        SamplerOptions opts = {}, std::size_t bins = 20);

// Continues from an intermediate state until exhausted.
Schedule continue_schedule(SamplerState& state, std::size_t bins = 20);

ScheduleSummary summarize(const std::vector<ScheduleEntry>& entries, const std::vector<std::string>& names,
                          const std::vector<std::uint32_t>& exponents, const std::vector<std::uint64_t>& totals,
                          std::size_t bins);

struct MixCurve {
  std::vector<std::string> sources;
  std::vector<std::uint64_t> steps;
  std::vector<std::vector<double>> probabilities;  // [sample][source]
};

// Mean-field trajectory: remaining counts are continuous and each step
// removes P_i from source i. Samples every `stride` steps, starting at 0.
MixCurve expected_mix_curve(const std::vector<DataSource>& sources, Beta beta, SamplerOptions opts = {},
                            std::uint64_t stride = 1);

// Kendall-style agreement between schedule order and the block-sequential
// order given by `rank` (lower rank first). Only pairs from different ranks
// count: (concordant - discordant) / (concordant + discordant).
double sequential_order_tau(const std::vector<ScheduleEntry>& entries, const std::vector<int>& rank);

// Rank per source by descending priority exponent; equal exponents share a rank.
std::vector<int> priority_ranks(const std::vector<std::uint32_t>& exponents);

struct SweepRow {
  Beta beta;
  double tau = 0.0;
  std::vector<std::optional<std::uint64_t>> completion_step;
  std::vector<double> mean_position;  // mean step / schedule length per source
};

std::vector<SweepRow> beta_sweep(const std::vector<DataSource>& sources, const std::vector<Beta>& betas,
                                 std::uint64_t seed, SamplerOptions opts = {});

nlohmann::json schedule_entry_json(const Schedule& s, const ScheduleEntry& e);
void to_json(nlohmann::json& j, const ScheduleSummary& v);
void to_json(nlohmann::json& j, const MixCurve& v);

}  // namespace unistage
