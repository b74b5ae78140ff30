// Copyright 2026 The unistage Authors
// SPDX-License-Identifier: Apache-2.0

#include "unistage/sampler.hpp"

#include <algorithm>
#include <bit>
#include <charconv>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

#include "unistage/error.hpp"

namespace unistage {

// ---------------------------------------------------------------------------
// Beta

namespace {

constexpr std::uint64_t kMaxU64 = std::numeric_limits<std::uint64_t>::max();

bool mul_overflows(std::uint64_t a, std::uint64_t b, std::uint64_t& out) {
  return __builtin_mul_overflow(a, b, &out);
}

}  // namespace

Beta Beta::ratio(std::uint64_t num, std::uint64_t den) {
  if (den == 0) throw ValidationError("beta: zero denominator");
  Beta b;
  const auto g = num == 0 ? den : std::gcd(num, den);
  b.num_ = num / g;
  b.den_ = den / g;
  return b;
}

Beta Beta::parse(std::string_view s) {
  const auto fail = [&] { return ValidationError("beta: cannot parse '" + std::string(s) + "'"); };
  if (s.empty()) throw fail();
  if (s.front() == '-') throw ValidationError("beta must be non-negative, got '" + std::string(s) + "'");
  if (s.front() == '+') s.remove_prefix(1);

  // "p/q" is the form str() produces for non-integers.
  if (const auto slash = s.find('/'); slash != std::string_view::npos) {
    const auto whole = [&](std::string_view part) {
      std::uint64_t v = 0;
      const auto [ptr, ec] = std::from_chars(part.data(), part.data() + part.size(), v);
      if (part.empty() || ec != std::errc{} || ptr != part.data() + part.size()) throw fail();
      return v;
    };
    return ratio(whole(s.substr(0, slash)), whole(s.substr(slash + 1)));
  }

  std::string_view mantissa = s;
  long exponent = 0;
  if (const auto e = s.find_first_of("eE"); e != std::string_view::npos) {
    mantissa = s.substr(0, e);
    auto exp_str = s.substr(e + 1);
    if (!exp_str.empty() && exp_str.front() == '+') exp_str.remove_prefix(1);
    const auto [ptr, ec] = std::from_chars(exp_str.data(), exp_str.data() + exp_str.size(), exponent);
    if (ec != std::errc{} || ptr != exp_str.data() + exp_str.size()) throw fail();
  }
  std::uint64_t num = 0;
  std::uint64_t den = 1;
  bool seen_digit = false;
  bool after_point = false;
  for (char c : mantissa) {
    if (c == '.') {
      if (after_point) throw fail();
      after_point = true;
      continue;
    }
    if (c < '0' || c > '9') throw fail();
    seen_digit = true;
    if (mul_overflows(num, 10, num) || num > kMaxU64 - static_cast<std::uint64_t>(c - '0')) {
      throw ValidationError("beta: too many significant digits in '" + std::string(s) + "'");
    }
    num += static_cast<std::uint64_t>(c - '0');
    if (after_point && mul_overflows(den, 10, den)) throw ValidationError("beta: too many decimals");
  }
  if (!seen_digit) throw fail();
  for (; exponent > 0; --exponent) {
    if (den % 10 == 0) {
      den /= 10;
    } else if (mul_overflows(num, 10, num)) {
      throw ValidationError("beta: value out of range '" + std::string(s) + "'");
    }
  }
  for (; exponent < 0; ++exponent) {
    if (num % 10 == 0 && num != 0) {
      num /= 10;
    } else if (mul_overflows(den, 10, den)) {
      throw ValidationError("beta: value out of range '" + std::string(s) + "'");
    }
  }
  return ratio(num, den);
}

Beta Beta::from_double(double v) {
  if (!std::isfinite(v)) throw ValidationError("beta must be finite");
  if (v < 0) throw ValidationError("beta must be non-negative");
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  if (ec != std::errc{}) throw ValidationError("beta: cannot format value");
  return parse(std::string_view(buf, static_cast<std::size_t>(ptr - buf)));
}

std::string Beta::str() const {
  if (den_ == 1) return std::to_string(num_);
  return std::to_string(num_) + "/" + std::to_string(den_);
}

// ---------------------------------------------------------------------------

std::uint32_t default_priority(DocClass c) {
  switch (c) {
    case DocClass::web: return 5;
    case DocClass::literature: return 4;
    case DocClass::encyclopedia: return 3;
    case DocClass::book: return 2;
  }
  return 0;
}

void validate(const DataSource& src) {
  if (src.name.empty()) throw ValidationError("data source: empty name");
  if (src.items.empty()) throw ValidationError("data source " + src.name + ": no items");
  if (src.epochs < 1) throw ValidationError("data source " + src.name + ": epochs must be at least 1");
}

std::vector<double> mix_probabilities(std::span<const double> remaining, std::span<const std::uint32_t> exponents,
                                      double beta) {
  std::vector<double> w(remaining.size());
  double total = 0.0;
  for (std::size_t i = 0; i < remaining.size(); ++i) {
    w[i] = remaining[i] * std::pow(beta, static_cast<double>(exponents[i]));
    total += w[i];
  }
  if (total <= 0.0) return std::vector<double>(remaining.size(), 0.0);
  for (auto& x : w) x /= total;
  return w;
}

// ---------------------------------------------------------------------------
// SamplerState

namespace {

__extension__ typedef unsigned __int128 u128;

// Uniform integer in [0, bound) by masked rejection on 64-bit words.
u128 uniform_below(std::mt19937_64& rng, u128 bound) {
  const u128 top = bound - 1;
  const std::uint64_t hi_top = static_cast<std::uint64_t>(top >> 64);
  if (hi_top == 0) {
    const auto lo_top = static_cast<std::uint64_t>(top);
    const std::uint64_t mask = lo_top == 0 ? 0 : (~0ull >> std::countl_zero(lo_top));
    for (;;) {
      const std::uint64_t x = rng() & mask;
      if (x <= lo_top) return x;
    }
  }
  const std::uint64_t mask = ~0ull >> std::countl_zero(hi_top);
  for (;;) {
    const std::uint64_t hi = rng() & mask;
    const std::uint64_t lo = rng();
    const u128 x = (static_cast<u128>(hi) << 64) | lo;
    if (x <= top) return x;
  }
}

BigInt uniform_below(std::mt19937_64& rng, const BigInt& bound) {
  const BigInt top = bound - 1;
  const std::size_t bits = top == 0 ? 1 : boost::multiprecision::msb(top) + 1;
  const std::size_t words = (bits + 63) / 64;
  const std::size_t spare = words * 64 - bits;
  for (;;) {
    BigInt x = 0;
    for (std::size_t w = 0; w < words; ++w) {
      std::uint64_t word = rng();
      if (w == 0 && spare) word >>= spare;
      x = (x << 64) | word;
    }
    if (x <= top) return x;
  }
}

BigInt pow_big(std::uint64_t base, std::uint32_t exp) {
  BigInt r = 1;
  for (std::uint32_t k = 0; k < exp; ++k) r *= base;
  return r;
}

}  // namespace

SamplerState::SamplerState(const std::vector<DataSource>& sources, Beta beta, std::uint64_t seed,
                           SamplerOptions opts)
    : beta_(beta), opts_(opts), seed_(seed), rng_(seed) {
  if (sources.empty()) throw ValidationError("sampler: no sources");
  for (const auto& src : sources) {
    validate(src);
    names_.push_back(src.name);
    exponents_.push_back(src.priority_exponent);
    std::vector<std::string> pool;
    pool.reserve(src.items.size() * src.epochs);
    for (std::uint32_t e = 0; e < src.epochs; ++e) pool.insert(pool.end(), src.items.begin(), src.items.end());
    pools_.push_back(std::move(pool));
  }
  init_weights();
}

void SamplerState::init_weights() {
  effective_ = (beta_.is_zero() && opts_.zero_beta == ZeroBeta::as_uniform) ? Beta::ratio(1, 1) : beta_;
  const std::uint32_t kmax = *std::max_element(exponents_.begin(), exponents_.end());
  units_.clear();
  BigInt max_unit = 0;
  for (auto k : exponents_) {
    // beta^K * den^Kmax = num^K * den^(Kmax - K)
    BigInt u = pow_big(effective_.numerator(), k) * pow_big(effective_.denominator(), kmax - k);
    max_unit = std::max(max_unit, u);
    units_.push_back(std::move(u));
  }
  std::size_t items = 0;
  for (const auto& p : pools_) items += p.size();
  const BigInt bound = max_unit * BigInt(std::max<std::size_t>(items, 1));
  fast_ = bound < (BigInt(1) << 126);
  units128_.clear();
  if (fast_) {
    for (const auto& u : units_) {
      const auto lo = static_cast<std::uint64_t>(u & BigInt(kMaxU64));
      const auto hi = static_cast<std::uint64_t>(u >> 64);
      units128_.push_back((static_cast<u128>(hi) << 64) | lo);
    }
  }
}

std::size_t SamplerState::total_remaining() const {
  std::size_t n = 0;
  for (const auto& p : pools_) n += p.size();
  return n;
}

BigInt SamplerState::total_weight() const {
  BigInt total = 0;
  for (std::size_t i = 0; i < pools_.size(); ++i) total += units_[i] * BigInt(pools_[i].size());
  return total;
}

bool SamplerState::exhausted() const { return total_weight() == 0; }

std::vector<double> SamplerState::probabilities() const {
  std::vector<double> remaining;
  remaining.reserve(pools_.size());
  for (const auto& p : pools_) remaining.push_back(static_cast<double>(p.size()));
  auto probs = mix_probabilities(remaining, exponents_, effective_.value());
  if (std::all_of(probs.begin(), probs.end(), [](double p) { return p == 0.0; })) throw PoolExhausted();
  return probs;
}

double SamplerState::source_probability(std::size_t i) const { return probabilities().at(i); }

Rational SamplerState::source_probability_exact(std::size_t i) const {
  const BigInt total = total_weight();
  if (total == 0) throw PoolExhausted();
  return Rational(units_.at(i) * BigInt(pools_.at(i).size()), total);
}

std::size_t SamplerState::choose_source(std::mt19937_64& rng) const { return choose_source_impl(rng); }

std::size_t SamplerState::choose_source_impl(std::mt19937_64& rng) const {
  const std::size_t n = pools_.size();
  if (fast_) {
    u128 total = 0;
    for (std::size_t i = 0; i < n; ++i) total += units128_[i] * pools_[i].size();
    if (total == 0) throw PoolExhausted();
    u128 r = uniform_below(rng, total);
    for (std::size_t i = 0; i < n; ++i) {
      const u128 w = units128_[i] * pools_[i].size();
      if (r < w) return i;
      r -= w;
    }
  } else {
    const BigInt total = total_weight();
    if (total == 0) throw PoolExhausted();
    BigInt r = uniform_below(rng, total);
    for (std::size_t i = 0; i < n; ++i) {
      const BigInt w = units_[i] * BigInt(pools_[i].size());
      if (r < w) return i;
      r -= w;
    }
  }
  throw Error("sampler: selection fell through");  // unreachable
}

Draw SamplerState::draw() {
  const std::size_t src = choose_source_impl(rng_);
  auto& pool = pools_[src];
  const auto pick = static_cast<std::size_t>(uniform_below(rng_, static_cast<u128>(pool.size())));
  Draw d;
  d.step = step_++;
  d.source = src;
  d.record_id = std::move(pool[pick]);
  if (pick + 1 != pool.size()) pool[pick] = std::move(pool.back());
  pool.pop_back();
  return d;
}

nlohmann::json SamplerState::to_json() const {
  std::ostringstream rng_state;
  rng_state << rng_;
  nlohmann::json sources = nlohmann::json::array();
  for (std::size_t i = 0; i < names_.size(); ++i) {
    sources.push_back({{"name", names_[i]}, {"priority_exponent", exponents_[i]}, {"remaining_items", pools_[i]}});
  }
  return {{"version", 1},
          {"beta", beta_.str()},
          {"zero_beta", opts_.zero_beta == ZeroBeta::strict ? "strict" : "as_uniform"},
          {"seed", seed_},
          {"step", step_},
          {"rng", rng_state.str()},
          {"sources", sources}};
}

SamplerState SamplerState::from_json(const nlohmann::json& j) {
  if (j.value("version", 0) != 1) throw ValidationError("sampler state: unsupported version");
  SamplerState s;
  s.beta_ = Beta::parse(j.at("beta").get<std::string>());
  s.opts_.zero_beta = j.at("zero_beta").get<std::string>() == "strict" ? ZeroBeta::strict : ZeroBeta::as_uniform;
  s.seed_ = j.at("seed").get<std::uint64_t>();
  s.step_ = j.at("step").get<std::uint64_t>();
  std::istringstream rng_state(j.at("rng").get<std::string>());
  rng_state >> s.rng_;
  if (!rng_state) throw ValidationError("sampler state: bad generator state");
  for (const auto& src : j.at("sources")) {
    s.names_.push_back(src.at("name").get<std::string>());
    s.exponents_.push_back(src.at("priority_exponent").get<std::uint32_t>());
    s.pools_.push_back(src.at("remaining_items").get<std::vector<std::string>>());
  }
  if (s.names_.empty()) throw ValidationError("sampler state: no sources");
  s.init_weights();
  return s;
}

// ---------------------------------------------------------------------------
// Schedules

ScheduleSummary summarize(const std::vector<ScheduleEntry>& entries, const std::vector<std::string>& names,
                          const std::vector<std::uint32_t>& exponents, const std::vector<std::uint64_t>& totals,
                          std::size_t bins) {
  const std::size_t k = names.size();
  ScheduleSummary s;
  s.sources = names;
  s.exponents = exponents;
  s.totals = totals;
  s.completion_step.assign(k, std::nullopt);
  s.frozen.assign(k, 0);

  std::vector<std::uint64_t> seen(k, 0);
  for (const auto& e : entries) {
    if (++seen[e.source] == totals[e.source]) s.completion_step[e.source] = e.step;
  }
  for (std::size_t i = 0; i < k; ++i) s.frozen[i] = totals[i] - seen[i];

  const std::uint64_t n = entries.size();
  if (n == 0 || bins == 0) return s;
  const std::uint64_t nb = std::min<std::uint64_t>(bins, n);
  std::vector<std::uint64_t> cumulative(k, 0);
  std::size_t pos = 0;
  for (std::uint64_t b = 0; b < nb; ++b) {
    const std::uint64_t end = (b + 1) * n / nb;
    PrefixBin bin;
    bin.end_step = end;
    bin.counts.assign(k, 0);
    for (; pos < end; ++pos) {
      ++bin.counts[entries[pos].source];
      ++cumulative[entries[pos].source];
    }
    bin.cumulative = cumulative;
    s.bins.push_back(std::move(bin));
  }
  return s;
}

Schedule continue_schedule(SamplerState& state, std::size_t bins) {
  Schedule sched;
  const std::size_t k = state.num_sources();
  std::vector<std::uint32_t> exponents;
  std::vector<std::uint64_t> totals;
  for (std::size_t i = 0; i < k; ++i) {
    sched.source_names.push_back(state.name(i));
    exponents.push_back(state.exponent(i));
    totals.push_back(state.remaining(i));
  }
  sched.entries.reserve(state.total_remaining());
  while (state.total_remaining() > 0 && !state.exhausted()) {
    auto d = state.draw();
    sched.entries.push_back({d.step, d.source, std::move(d.record_id)});
  }
  sched.summary = summarize(sched.entries, sched.source_names, exponents, totals, bins);
  return sched;
}

Schedule build_schedule(const std::vector<DataSource>& sources, Beta beta, std::uint64_t seed, SamplerOptions opts,
                        std::size_t bins) {
  SamplerState state(sources, beta, seed, opts);
  return continue_schedule(state, bins);
}

MixCurve expected_mix_curve(const std::vector<DataSource>& sources, Beta beta, SamplerOptions opts,
                            std::uint64_t stride) {
  if (stride == 0) throw ValidationError("mix curve: stride must be positive");
  MixCurve curve;
  std::vector<double> remaining;
  std::vector<std::uint32_t> exponents;
  std::uint64_t total = 0;
  for (const auto& src : sources) {
    validate(src);
    curve.sources.push_back(src.name);
    remaining.push_back(static_cast<double>(src.items.size()) * src.epochs);
    exponents.push_back(src.priority_exponent);
    total += static_cast<std::uint64_t>(src.items.size()) * src.epochs;
  }
  const double b = (beta.is_zero() && opts.zero_beta == ZeroBeta::as_uniform) ? 1.0 : beta.value();
  for (std::uint64_t t = 0; t < total; ++t) {
    const auto p = mix_probabilities(remaining, exponents, b);
    if (t % stride == 0) {
      curve.steps.push_back(t);
      curve.probabilities.push_back(p);
    }
    for (std::size_t i = 0; i < remaining.size(); ++i) remaining[i] = std::max(0.0, remaining[i] - p[i]);
  }
  return curve;
}

std::vector<int> priority_ranks(const std::vector<std::uint32_t>& exponents) {
  std::vector<std::uint32_t> distinct(exponents);
  std::sort(distinct.begin(), distinct.end(), std::greater<>());
  distinct.erase(std::unique(distinct.begin(), distinct.end()), distinct.end());
  std::vector<int> rank;
  for (auto k : exponents) {
    rank.push_back(static_cast<int>(std::find(distinct.begin(), distinct.end(), k) - distinct.begin()));
  }
  return rank;
}

double sequential_order_tau(const std::vector<ScheduleEntry>& entries, const std::vector<int>& rank) {
  if (rank.empty()) return 1.0;
  const int levels = *std::max_element(rank.begin(), rank.end()) + 1;
  std::vector<std::uint64_t> seen(static_cast<std::size_t>(levels), 0);
  long double concordant = 0;
  long double discordant = 0;
  for (const auto& e : entries) {
    const int r = rank.at(e.source);
    for (int m = 0; m < levels; ++m) {
      if (m < r) concordant += seen[static_cast<std::size_t>(m)];
      if (m > r) discordant += seen[static_cast<std::size_t>(m)];
    }
    ++seen[static_cast<std::size_t>(r)];
  }
  if (concordant + discordant == 0) return 1.0;
  return static_cast<double>((concordant - discordant) / (concordant + discordant));
}

std::vector<SweepRow> beta_sweep(const std::vector<DataSource>& sources, const std::vector<Beta>& betas,
                                 std::uint64_t seed, SamplerOptions opts) {
  std::vector<std::uint32_t> exponents;
  for (const auto& s : sources) exponents.push_back(s.priority_exponent);
  const auto rank = priority_ranks(exponents);
  std::vector<SweepRow> rows;
  for (const auto& beta : betas) {
    const auto sched = build_schedule(sources, beta, seed, opts, 0);
    SweepRow row;
    row.beta = beta;
    row.tau = sequential_order_tau(sched.entries, rank);
    row.completion_step = sched.summary.completion_step;
    std::vector<double> sum(sources.size(), 0.0);
    std::vector<double> cnt(sources.size(), 0.0);
    const double len = static_cast<double>(std::max<std::size_t>(sched.entries.size(), 1));
    for (const auto& e : sched.entries) {
      sum[e.source] += static_cast<double>(e.step) / len;
      cnt[e.source] += 1.0;
    }
    for (std::size_t i = 0; i < sources.size(); ++i) row.mean_position.push_back(cnt[i] > 0 ? sum[i] / cnt[i] : 0.0);
    rows.push_back(std::move(row));
  }
  return rows;
}

nlohmann::json schedule_entry_json(const Schedule& s, const ScheduleEntry& e) {
  return {{"step", e.step}, {"source", s.source_names.at(e.source)}, {"record_id", e.record_id}};
}

void to_json(nlohmann::json& j, const ScheduleSummary& v) {
  nlohmann::json completion = nlohmann::json::array();
  for (const auto& c : v.completion_step) completion.push_back(c ? nlohmann::json(*c) : nlohmann::json(nullptr));
  nlohmann::json bins = nlohmann::json::array();
  for (const auto& b : v.bins) bins.push_back({{"end_step", b.end_step}, {"counts", b.counts}, {"cumulative", b.cumulative}});
  j = nlohmann::json{{"sources", v.sources},
                     {"priority_exponents", v.exponents},
                     {"totals", v.totals},
                     {"completion_step", completion},
                     {"frozen", v.frozen},
                     {"bins", bins}};
}

void to_json(nlohmann::json& j, const MixCurve& v) {
  j = nlohmann::json{{"sources", v.sources}, {"steps", v.steps}, {"probabilities", v.probabilities}};
}

}  // namespace unistage
