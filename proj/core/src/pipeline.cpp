// Copyright 2026 The unistage Authors
// SPDX-License-Identifier: Apache-2.0

#include "unistage/pipeline.hpp"

#include <algorithm>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <unordered_map>

#include "unistage/curation.hpp"
#include "unistage/digest.hpp"
#include "unistage/error.hpp"
#include "unistage/jsonl.hpp"
#include "unistage/packer.hpp"

#ifndef UNISTAGE_VERSION
#define UNISTAGE_VERSION "0.0.0"
#endif

namespace unistage {

std::string_view tool_version() { return UNISTAGE_VERSION; }

namespace {

using json = nlohmann::json;

void check_keys(const json& j, std::initializer_list<std::string_view> allowed, std::string_view where) {
  if (!j.is_object()) throw ValidationError("config: '" + std::string(where) + "' must be an object");
  for (const auto& [key, _] : j.items()) {
    if (std::find(allowed.begin(), allowed.end(), key) == allowed.end()) {
      throw ValidationError("config: unknown key '" + key + "' in " + std::string(where));
    }
  }
}

template <typename T>
void take(const json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

std::string file_digest(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw IoError("cannot read " + p.string());
  Sha256 h;
  char buf[1 << 16];
  while (in) {
    in.read(buf, sizeof buf);
    h.update(std::string_view(buf, static_cast<std::size_t>(in.gcount())));
  }
  return h.hex_digest();
}

}  // namespace

// ---------------------------------------------------------------------------
// Config

void PipelineConfig::validate() const {
  if (!(curate.density_threshold >= 0.0 && curate.density_threshold <= 1.0)) {
    throw ValidationError("config: curate.density_threshold must lie in [0, 1]");
  }
  if (curate.window == 0) throw ValidationError("config: curate.window must be positive");
  if (curate.quality_judge != "heuristic" && curate.quality_judge != "none") {
    throw ValidationError("config: curate.quality_judge must be 'heuristic' or 'none'");
  }
  if (!(curate.quality_threshold >= 0.0 && curate.quality_threshold <= 1.0)) {
    throw ValidationError("config: curate.quality_threshold must lie in [0, 1]");
  }
  if (!(curate.dedup_threshold > 0.0 && curate.dedup_threshold <= 1.0)) {
    throw ValidationError("config: curate.dedup_threshold must lie in (0, 1]");
  }
  if (curate.shingle_size == 0 || curate.num_permutations == 0) {
    throw ValidationError("config: curate shingle_size and num_permutations must be positive");
  }
  if (!(curate.error_budget >= 0.0 && curate.error_budget <= 1.0)) {
    throw ValidationError("config: curate.error_budget must lie in [0, 1]");
  }
  unify.validate();
  if (!backends.contains(unify_backend)) {
    throw ValidationError("config: unify.backend '" + unify_backend + "' is not defined in backends");
  }
  if (!fidelity.judge_backend.empty() && !backends.contains(fidelity.judge_backend)) {
    throw ValidationError("config: fidelity.judge_backend '" + fidelity.judge_backend + "' is not defined in backends");
  }
  if (fidelity.method == FidelityMethod::model_judge && fidelity.judge_backend.empty()) {
    throw ValidationError("config: fidelity.method model_judge needs fidelity.judge_backend");
  }
  (void)Beta::parse(schedule.beta);
  if (schedule.pretrain_epochs == 0 || schedule.sft_epochs == 0) {
    throw ValidationError("config: schedule epochs must be positive");
  }
  for (const auto& [cls, _] : schedule.priorities) (void)parse_doc_class(cls);
  if (schedule.bins == 0) throw ValidationError("config: schedule.bins must be positive");
  if (schedule.mix_curve_points < 2) throw ValidationError("config: schedule.mix_curve_points must be at least 2");
  if (pack.length == 0) throw ValidationError("config: pack.length must be positive");
  if (pack.tokenizer.empty()) throw ValidationError("config: pack.tokenizer must be 'desk' or a spec path");
}

std::filesystem::path PipelineConfig::resolve(const std::string& p) const {
  std::filesystem::path path(p);
  return path.is_absolute() ? path : base_dir / path;
}

std::filesystem::path PipelineConfig::input(const std::string& name) const {
  std::filesystem::path path(name);
  return path.is_absolute() ? path : resolve(paths.input_dir) / path;
}

std::filesystem::path PipelineConfig::output(const std::string& name) const {
  return resolve(paths.output_dir) / name;
}

std::string PipelineConfig::hash() const {
  json j = *this;
  j.erase("paths");
  return sha256_hex(j.dump());
}

void to_json(json& j, const PipelineConfig& v) {
  json priorities = json::object();
  for (const auto& [k, p] : v.schedule.priorities) priorities[k] = p;
  json unify = v.unify;
  unify["backend"] = v.unify_backend;
  json backends = json::object();
  for (const auto& [name, b] : v.backends) backends[name] = b;
  j = json{
      {"seed", v.seed},
      {"paths",
       {{"input_dir", v.paths.input_dir},
        {"output_dir", v.paths.output_dir},
        {"documents", v.paths.documents},
        {"dictionary", v.paths.dictionary},
        {"stoplist", v.paths.stoplist},
        {"sft", v.paths.sft}}},
      {"curate",
       {{"density_threshold", v.curate.density_threshold},
        {"normalization", to_string(v.curate.normalization)},
        {"min_term_length", v.curate.min_term_length},
        {"window", v.curate.window},
        {"flank", v.curate.flank},
        {"quality_judge", v.curate.quality_judge},
        {"quality_threshold", v.curate.quality_threshold},
        {"dedup_method", to_string(v.curate.dedup_method)},
        {"dedup_threshold", v.curate.dedup_threshold},
        {"shingle_size", v.curate.shingle_size},
        {"num_permutations", v.curate.num_permutations},
        {"error_budget", v.curate.error_budget}}},
      {"unify", unify},
      {"fidelity",
       {{"method", to_string(v.fidelity.method)},
        {"route_cross_language", v.fidelity.route_cross_language},
        {"judge_backend", v.fidelity.judge_backend},
        {"judge_temperature", v.fidelity.judge_temperature}}},
      {"schedule",
       {{"beta", v.schedule.beta},
        {"strict_beta_zero", v.schedule.strict_beta_zero},
        {"pretrain_epochs", v.schedule.pretrain_epochs},
        {"sft_epochs", v.schedule.sft_epochs},
        {"priorities", priorities},
        {"sft_priority", v.schedule.sft_priority},
        {"bins", v.schedule.bins},
        {"mix_curve_points", v.schedule.mix_curve_points}}},
      {"pack", {{"length", v.pack.length}, {"tokenizer", v.pack.tokenizer}}},
      {"backends", backends},
  };
}

void from_json(const json& j, PipelineConfig& v) {
  check_keys(j, {"seed", "paths", "curate", "unify", "fidelity", "schedule", "pack", "backends"}, "config");
  PipelineConfig c;
  take(j, "seed", c.seed);
  if (j.contains("paths")) {
    const auto& p = j.at("paths");
    check_keys(p, {"input_dir", "output_dir", "documents", "dictionary", "stoplist", "sft"}, "paths");
    take(p, "input_dir", c.paths.input_dir);
    take(p, "output_dir", c.paths.output_dir);
    take(p, "documents", c.paths.documents);
    take(p, "dictionary", c.paths.dictionary);
    take(p, "stoplist", c.paths.stoplist);
    take(p, "sft", c.paths.sft);
  }
  if (j.contains("curate")) {
    const auto& s = j.at("curate");
    check_keys(s,
               {"density_threshold", "normalization", "min_term_length", "window", "flank", "quality_judge",
                "quality_threshold", "dedup_method", "dedup_threshold", "shingle_size", "num_permutations",
                "error_budget"},
               "curate");
    take(s, "density_threshold", c.curate.density_threshold);
    if (s.contains("normalization")) c.curate.normalization = parse_normalization(s.at("normalization").get<std::string>());
    take(s, "min_term_length", c.curate.min_term_length);
    take(s, "window", c.curate.window);
    take(s, "flank", c.curate.flank);
    take(s, "quality_judge", c.curate.quality_judge);
    take(s, "quality_threshold", c.curate.quality_threshold);
    if (s.contains("dedup_method")) c.curate.dedup_method = parse_dedup_method(s.at("dedup_method").get<std::string>());
    take(s, "dedup_threshold", c.curate.dedup_threshold);
    take(s, "shingle_size", c.curate.shingle_size);
    take(s, "num_permutations", c.curate.num_permutations);
    take(s, "error_budget", c.curate.error_budget);
  }
  if (j.contains("unify")) {
    json u = j.at("unify");
    if (!u.is_object()) throw ValidationError("config: 'unify' must be an object");
    if (u.contains("backend")) {
      c.unify_backend = u.at("backend").get<std::string>();
      u.erase("backend");
    }
    try {
      c.unify = u.get<UnifyConfig>();
    } catch (const ValidationError& e) {
      throw ValidationError(std::string("config: ") + e.what());
    }
  }
  if (j.contains("fidelity")) {
    const auto& f = j.at("fidelity");
    check_keys(f, {"method", "route_cross_language", "judge_backend", "judge_temperature"}, "fidelity");
    if (f.contains("method")) c.fidelity.method = parse_fidelity_method(f.at("method").get<std::string>());
    take(f, "route_cross_language", c.fidelity.route_cross_language);
    take(f, "judge_backend", c.fidelity.judge_backend);
    take(f, "judge_temperature", c.fidelity.judge_temperature);
  }
  if (j.contains("schedule")) {
    const auto& s = j.at("schedule");
    check_keys(s,
               {"beta", "strict_beta_zero", "pretrain_epochs", "sft_epochs", "priorities", "sft_priority", "bins",
                "mix_curve_points"},
               "schedule");
    if (s.contains("beta")) {
      // Numbers are accepted but strings keep decimals exact.
      const auto& b = s.at("beta");
      c.schedule.beta = b.is_string() ? b.get<std::string>() : Beta::from_double(b.get<double>()).str();
    }
    take(s, "strict_beta_zero", c.schedule.strict_beta_zero);
    take(s, "pretrain_epochs", c.schedule.pretrain_epochs);
    take(s, "sft_epochs", c.schedule.sft_epochs);
    if (s.contains("priorities")) {
      for (const auto& [k, p] : s.at("priorities").items()) {
        (void)parse_doc_class(k);
        c.schedule.priorities[k] = p.get<std::uint32_t>();
      }
    }
    take(s, "sft_priority", c.schedule.sft_priority);
    take(s, "bins", c.schedule.bins);
    take(s, "mix_curve_points", c.schedule.mix_curve_points);
  }
  if (j.contains("pack")) {
    const auto& p = j.at("pack");
    check_keys(p, {"length", "tokenizer"}, "pack");
    take(p, "length", c.pack.length);
    take(p, "tokenizer", c.pack.tokenizer);
  }
  if (j.contains("backends")) {
    c.backends.clear();
    for (const auto& [name, b] : j.at("backends").items()) {
      try {
        c.backends[name] = b.get<BackendConfig>();
      } catch (const ValidationError& e) {
        throw ValidationError("config: backends." + name + ": " + e.what());
      }
    }
  }
  v = std::move(c);
}

PipelineConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    throw ValidationError("config " + path.string() + ": " + e.what());
  }
  PipelineConfig c;
  try {
    c = j.get<PipelineConfig>();
  } catch (const json::exception& e) {
    throw ValidationError("config " + path.string() + ": " + e.what());
  }
  c.base_dir = path.parent_path().empty() ? std::filesystem::path(".") : path.parent_path();
  c.validate();
  return c;
}

// ---------------------------------------------------------------------------
// Stages and manifest

std::string_view to_string(Stage s) {
  switch (s) {
    case Stage::curate: return "curate";
    case Stage::unify: return "unify";
    case Stage::schedule: return "schedule";
    case Stage::pack: return "pack";
  }
  return "curate";
}

Stage parse_stage(std::string_view s) {
  for (auto st : kAllStages) {
    if (to_string(st) == s) return st;
  }
  throw ValidationError("unknown stage '" + std::string(s) + "'");
}

std::set<Stage> parse_stages(std::string_view list) {
  std::set<Stage> out;
  std::size_t pos = 0;
  while (pos <= list.size()) {
    auto comma = list.find(',', pos);
    if (comma == std::string_view::npos) comma = list.size();
    auto item = list.substr(pos, comma - pos);
    while (!item.empty() && item.front() == ' ') item.remove_prefix(1);
    while (!item.empty() && item.back() == ' ') item.remove_suffix(1);
    if (!item.empty()) out.insert(parse_stage(item));
    pos = comma + 1;
  }
  if (out.empty()) out.insert(std::begin(kAllStages), std::end(kAllStages));
  return out;
}

json default_train_hparams() {
  return json{{"sequence_length", 4096}, {"batch_size", 128}, {"learning_rate", 1e-4}};
}

bool RunManifest::complete() const {
  for (auto s : kAllStages) {
    auto it = stages.find(std::string(to_string(s)));
    if (it == stages.end() || it->second.status != "complete") return false;
  }
  return true;
}

namespace {

json manifest_body(const RunManifest& v) {
  json counts = json::object();
  for (const auto& [k, c] : v.stage_counts) counts[k] = {{"input", c.input}, {"output", c.output}};
  json stages = json::object();
  for (const auto& [k, s] : v.stages) {
    stages[k] = {{"status", s.status}, {"error", s.error}, {"outputs", s.outputs}, {"details", s.details}};
  }
  return json{{"config_hash", v.config_hash},
              {"stage_counts", counts},
              {"seed", v.seed},
              {"tool_version", v.tool_version},
              {"recorded_train_hparams", v.recorded_train_hparams},
              {"inputs", v.inputs},
              {"stages", stages},
              {"config", v.config},
              {"complete", v.complete()}};
}

}  // namespace

std::string RunManifest::digest() const { return sha256_hex(manifest_body(*this).dump()); }

void to_json(json& j, const RunManifest& v) {
  j = manifest_body(v);
  j["digest"] = v.digest();
}

void from_json(const json& j, RunManifest& v) {
  v = RunManifest{};
  v.config_hash = j.at("config_hash").get<std::string>();
  for (const auto& [k, c] : j.at("stage_counts").items()) {
    v.stage_counts[k] = {c.at("input").get<std::uint64_t>(), c.at("output").get<std::uint64_t>()};
  }
  v.seed = j.at("seed").get<std::uint64_t>();
  v.tool_version = j.at("tool_version").get<std::string>();
  v.recorded_train_hparams = j.at("recorded_train_hparams");
  v.inputs = j.at("inputs").get<std::map<std::string, std::string>>();
  for (const auto& [k, s] : j.at("stages").items()) {
    StageRecord r;
    r.status = s.at("status").get<std::string>();
    r.error = s.value("error", std::string{});
    r.outputs = s.at("outputs").get<std::map<std::string, std::string>>();
    r.details = s.value("details", json::object());
    v.stages[k] = std::move(r);
  }
  v.config = j.value("config", json::object());
}

RunManifest read_manifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open manifest " + path.string());
  try {
    return json::parse(in).get<RunManifest>();
  } catch (const json::exception& e) {
    throw ValidationError("manifest " + path.string() + ": " + e.what());
  }
}

void write_manifest(const RunManifest& m, const std::filesystem::path& path) {
  json j = m;
  detail::atomic_write(path, j.dump(2) + "\n");
}

// ---------------------------------------------------------------------------
// Run

namespace {

struct Context {
  const PipelineConfig& cfg;
  const RunOptions& opts;
  RunManifest& manifest;
  std::vector<std::unique_ptr<LlmBackend>> owned;

  LlmBackend& backend(const std::string& name) {
    if (auto it = opts.backend_overrides.find(name); it != opts.backend_overrides.end()) return *it->second;
    auto it = cfg.backends.find(name);
    if (it == cfg.backends.end()) throw ValidationError("backend '" + name + "' is not defined");
    BackendConfig bc = it->second;
    if (!bc.cassette_path.empty()) bc.cassette_path = cfg.resolve(bc.cassette_path).string();
    owned.push_back(make_backend(bc));
    return *owned.back();
  }
};

template <typename T>
void emit(StageRecord& rec, const PipelineConfig& cfg, const char* name, const std::vector<T>& records) {
  const auto frag = write_records(records, cfg.output(name));
  rec.outputs[name] = frag.digest;
}

void emit_json(StageRecord& rec, const PipelineConfig& cfg, const char* name, const json& body) {
  const auto text = body.dump(2) + "\n";
  detail::atomic_write(cfg.output(name), text);
  rec.outputs[name] = sha256_hex(text);
}

std::filesystem::path require(const std::filesystem::path& p, std::string_view what) {
  if (!std::filesystem::exists(p)) throw IoError(std::string(what) + " not found: " + p.string());
  return p;
}

void run_curate(Context& ctx, StageRecord& rec) {
  const auto& cfg = ctx.cfg;
  const auto& cc = cfg.curate;
  const auto docs_path = require(cfg.input(cfg.paths.documents), "documents");
  const auto dict_path = require(cfg.input(cfg.paths.dictionary), "dictionary");
  ctx.manifest.inputs["documents"] = file_digest(docs_path);
  ctx.manifest.inputs["dictionary"] = file_digest(dict_path);
  std::filesystem::path stop_path;
  if (!cfg.paths.stoplist.empty()) {
    stop_path = require(cfg.input(cfg.paths.stoplist), "stoplist");
    ctx.manifest.inputs["stoplist"] = file_digest(stop_path);
  }

  auto read = read_records<Document>(docs_path, ReadOptions{cc.error_budget});
  std::set<std::string> ids;
  for (const auto& d : read.records) {
    if (!ids.insert(d.id).second) throw ValidationError("documents: duplicate id '" + d.id + "'");
  }
  const auto dict = DomainDictionary::load(dict_path, cc.normalization, cc.min_term_length, stop_path);
  const UnigramTokenizer tok(cc.normalization);

  std::vector<DensityReport> density;
  const auto extracted = filter_domain(read.records, dict, tok, cc.density_threshold, &density);

  const RuleSentenceSplitter splitter;
  std::vector<Segment> segments;
  std::size_t overlong = 0;
  for (const auto& doc : extracted) {
    auto seg = segment(doc, SegmentOptions{cc.window, cc.flank}, splitter, tok);
    overlong += seg.overlong.size();
    for (auto& s : seg.segments) segments.push_back(std::move(s));
  }

  CleanResult cleaned;
  if (cc.quality_judge == "none") {
    cleaned = clean(segments, ConstantQualityJudge(1.0), cc.quality_threshold);
  } else {
    cleaned = clean(segments, HeuristicQualityJudge(), cc.quality_threshold);
  }

  ShingleOptions so;
  so.shingle_size = cc.shingle_size;
  so.num_permutations = cc.num_permutations;
  const HashingEmbedder embedder;
  const auto dedup = deduplicate(cleaned.kept, cc.dedup_method, cc.dedup_threshold, &embedder, so);

  emit(rec, cfg, outputs::kExtracted, extracted);
  emit(rec, cfg, outputs::kDensity, density);
  emit(rec, cfg, outputs::kSegments, segments);
  emit(rec, cfg, outputs::kCleaned, cleaned.kept);
  emit(rec, cfg, outputs::kDeduped, dedup.kept);
  emit(rec, cfg, outputs::kDedupDecisions, dedup.decisions);

  auto& counts = ctx.manifest.stage_counts;
  counts["extract"] = {read.records.size(), extracted.size()};
  counts["segment"] = {extracted.size(), segments.size()};
  counts["clean"] = {segments.size(), cleaned.kept.size()};
  counts["dedup"] = {cleaned.kept.size(), dedup.kept.size()};

  json errors = json::array();
  for (const auto& e : read.errors) errors.push_back({{"line", e.line}, {"message", e.message}});
  rec.details = {{"read_errors", errors},
                 {"overlong_segments", overlong},
                 {"quality_dropped", cleaned.dropped.size()},
                 {"quality_judge_failed", cleaned.judge_failed.size()},
                 {"dedup_candidate_pairs", dedup.candidate_pairs},
                 {"dedup_method", to_string(cc.dedup_method)}};
}

void run_unify(Context& ctx, StageRecord& rec) {
  const auto& cfg = ctx.cfg;
  const auto segments =
      read_records_strict<Segment>(require(cfg.output(outputs::kDeduped), "deduplicated segments"));
  const auto docs = read_records_strict<Document>(require(cfg.output(outputs::kExtracted), "extracted documents"));
  std::unordered_map<std::string, DocClass> class_of;
  for (const auto& d : docs) class_of.emplace(d.id, d.doc_class);
  DocClassLookup lookup = [&](const Segment& s) -> std::optional<DocClass> {
    auto it = class_of.find(s.parent_doc);
    if (it == class_of.end()) return std::nullopt;
    return it->second;
  };

  auto& generator = ctx.backend(cfg.unify_backend);
  LlmBackend* judge = cfg.fidelity.judge_backend.empty() ? nullptr : &ctx.backend(cfg.fidelity.judge_backend);
  const UnigramTokenizer tok;
  FidelityChecker::Options fo;
  fo.method = cfg.fidelity.method;
  fo.threshold = cfg.unify.deviation_threshold;
  fo.route_cross_language = cfg.fidelity.route_cross_language;
  fo.judge_temperature = cfg.fidelity.judge_temperature;
  const FidelityChecker checker(fo, &tok, judge);

  const auto result = unify(segments, cfg.unify, generator, checker, lookup);
  generator.flush();
  if (judge) judge->flush();

  emit(rec, cfg, outputs::kRecords, result.records);
  emit(rec, cfg, outputs::kDropped, result.dropped);
  ctx.manifest.stage_counts["unify"] = {segments.size(), result.records.size()};

  const auto rejected = result.stats.dropped_by_reason.contains("deviation_rejected")
                            ? result.stats.dropped_by_reason.at("deviation_rejected")
                            : 0;
  rec.details = {{"stats", result.stats},
                 {"model_tag", generator.model_tag()},
                 {"deviation_rejection_rate",
                  segments.empty() ? 0.0 : static_cast<double>(rejected) / static_cast<double>(segments.size())}};
}

std::vector<InstructionRecord> read_sft(const Context& ctx) {
  const auto& cfg = ctx.cfg;
  if (cfg.paths.sft.empty()) return {};
  auto recs = read_records_strict<InstructionRecord>(require(cfg.input(cfg.paths.sft), "fine-tuning records"));
  for (const auto& r : recs) {
    if (r.origin == Origin::pretrain_unified) {
      throw ValidationError("fine-tuning records: '" + r.id + "' has origin pretrain_unified");
    }
  }
  return recs;
}

void run_schedule(Context& ctx, StageRecord& rec) {
  const auto& cfg = ctx.cfg;
  const auto& sc = cfg.schedule;
  const auto records = read_records_strict<InstructionRecord>(require(cfg.output(outputs::kRecords), "records"));
  const auto sft = read_sft(ctx);
  if (!cfg.paths.sft.empty()) ctx.manifest.inputs["sft"] = file_digest(cfg.input(cfg.paths.sft));

  std::vector<DataSource> sources;
  for (auto cls : kAllDocClasses) {
    DataSource src;
    src.name = std::string(to_string(cls));
    auto p = sc.priorities.find(src.name);
    src.priority_exponent = p != sc.priorities.end() ? p->second : default_priority(cls);
    src.epochs = sc.pretrain_epochs;
    for (const auto& r : records) {
      if (r.doc_class == cls) src.items.push_back(r.id);
    }
    if (!src.items.empty()) sources.push_back(std::move(src));
  }
  if (!sft.empty()) {
    DataSource src;
    src.name = "sft";
    src.priority_exponent = sc.sft_priority;
    src.epochs = sc.sft_epochs;
    for (const auto& r : sft) src.items.push_back(r.id);
    sources.push_back(std::move(src));
  }
  if (sources.empty()) throw ValidationError("schedule: no records to schedule");

  const auto beta = Beta::parse(sc.beta);
  SamplerOptions so;
  so.zero_beta = sc.strict_beta_zero ? ZeroBeta::strict : ZeroBeta::as_uniform;
  const auto schedule = build_schedule(sources, beta, cfg.seed, so, sc.bins);

  std::vector<json> lines;
  lines.reserve(schedule.entries.size());
  for (const auto& e : schedule.entries) lines.push_back(schedule_entry_json(schedule, e));
  emit(rec, cfg, outputs::kSchedule, lines);

  std::uint64_t total = 0;
  for (const auto& s : sources) total += s.items.size() * s.epochs;
  const std::uint64_t stride = std::max<std::uint64_t>(1, total / (sc.mix_curve_points - 1));
  const auto curve = expected_mix_curve(sources, beta, so, stride);
  json summary = {{"beta", beta.str()},
                  {"beta_zero_aliased", beta.is_zero() && !sc.strict_beta_zero},
                  {"summary", schedule.summary},
                  {"mix_curve", curve}};
  emit_json(rec, cfg, outputs::kScheduleSummary, summary);

  ctx.manifest.stage_counts["schedule"] = {records.size() + sft.size(), schedule.entries.size()};
  json src_json = json::array();
  for (const auto& s : sources) {
    src_json.push_back(
        {{"name", s.name}, {"priority_exponent", s.priority_exponent}, {"epochs", s.epochs}, {"items", s.items.size()}});
  }
  rec.details = {{"beta", beta.str()}, {"sources", src_json}, {"mix_curve", curve}};
  if (beta.is_zero() && !sc.strict_beta_zero) {
    rec.details["warning"] = "beta 0 read as uniform priorities (beta 1)";
  }
}

void run_pack(Context& ctx, StageRecord& rec) {
  const auto& cfg = ctx.cfg;
  const auto records = read_records_strict<InstructionRecord>(require(cfg.output(outputs::kRecords), "records"));
  const auto sft = read_sft(ctx);
  std::unordered_map<std::string, const InstructionRecord*> by_id;
  for (const auto* set : {&records, &sft}) {
    for (const auto& r : *set) {
      if (!by_id.emplace(r.id, &r).second) throw ValidationError("pack: duplicate record id '" + r.id + "'");
    }
  }
  const auto schedule = read_records_strict<json>(require(cfg.output(outputs::kSchedule), "schedule"));

  std::unique_ptr<Tokenizer> tok;
  if (cfg.pack.tokenizer == "desk") {
    tok = std::make_unique<DeskTokenizer>();
  } else {
    const auto spec = require(cfg.resolve(cfg.pack.tokenizer), "tokenizer spec");
    ctx.manifest.inputs["tokenizer"] = file_digest(spec);
    tok = VocabTokenizer::load(spec);
  }

  Packer packer(*tok, cfg.pack.length);
  std::vector<PackedSequence> seqs;
  for (const auto& e : schedule) {
    const auto id = e.at("record_id").get<std::string>();
    auto it = by_id.find(id);
    if (it == by_id.end()) throw ValidationError("pack: schedule names unknown record '" + id + "'");
    if (auto s = packer.push(*it->second)) seqs.push_back(std::move(*s));
  }
  if (auto s = packer.finish()) seqs.push_back(std::move(*s));
  for (const auto& s : seqs) validate(s, cfg.pack.length, *tok);

  emit(rec, cfg, outputs::kPacked, seqs);
  const auto mask = mask_stats(seqs);
  emit_json(rec, cfg, outputs::kPackStats, {{"pack", packer.stats()}, {"mask", mask}});

  ctx.manifest.stage_counts["pack"] = {schedule.size(), packer.stats().records_packed};
  rec.details = {{"sequences", seqs.size()},
                 {"length", cfg.pack.length},
                 {"skipped_overlong", packer.stats().skipped_overlong.size()},
                 {"tokenizer_failures", packer.stats().tokenizer_failures.size()},
                 {"pad_fraction", mask.pad_fraction}};
}

}  // namespace

RunManifest run(const PipelineConfig& config, const std::set<Stage>& stages, const RunOptions& options) {
  config.validate();
  const auto manifest_path = config.output(outputs::kManifest);
  RunManifest m;
  if (std::filesystem::exists(manifest_path)) m = read_manifest(manifest_path);
  m.config_hash = config.hash();
  m.seed = config.seed;
  m.tool_version = std::string(tool_version());
  m.recorded_train_hparams = default_train_hparams();
  json cfg_json = config;
  cfg_json.erase("paths");
  m.config = cfg_json;
  for (auto s : kAllStages) m.stages.try_emplace(std::string(to_string(s)));

  // Stages after a re-run one lose their completed status unless they run too.
  bool upstream_rerun = false;
  for (auto s : kAllStages) {
    auto& rec = m.stages[std::string(to_string(s))];
    if (stages.contains(s)) {
      upstream_rerun = true;
      rec = StageRecord{};
    } else if (upstream_rerun && rec.status == "complete") {
      rec.status = "stale";
    }
  }

  std::filesystem::create_directories(config.resolve(config.paths.output_dir));
  Context ctx{config, options, m, {}};
  for (auto s : kAllStages) {
    if (!stages.contains(s)) continue;
    auto& rec = m.stages[std::string(to_string(s))];
    try {
      switch (s) {
        case Stage::curate: run_curate(ctx, rec); break;
        case Stage::unify: run_unify(ctx, rec); break;
        case Stage::schedule: run_schedule(ctx, rec); break;
        case Stage::pack: run_pack(ctx, rec); break;
      }
      rec.status = "complete";
    } catch (const std::exception& e) {
      rec.status = "failed";
      rec.error = e.what();
      write_manifest(m, manifest_path);
      throw;
    }
    write_manifest(m, manifest_path);
  }
  return m;
}

// ---------------------------------------------------------------------------
// Report

std::string report(const RunManifest& m) {
  std::ostringstream os;
  auto status_of = [&](std::string_view stage) {
    auto it = m.stages.find(std::string(stage));
    return it == m.stages.end() ? std::string("pending") : it->second.status;
  };
  auto owner = [](std::string_view step) -> std::string_view {
    if (step == "unify" || step == "schedule" || step == "pack") return step;
    return "curate";
  };
  os << "run " << m.digest().substr(0, 16) << "  config " << m.config_hash.substr(0, 16) << "  seed " << m.seed
     << "  version " << m.tool_version << (m.complete() ? "" : "  [incomplete]") << "\n\n";
  os << "funnel\n";
  static constexpr const char* kLabels[] = {"extracted", "segmented", "cleaned", "deduped",
                                            "unified",   "scheduled", "packed"};
  for (std::size_t i = 0; i < std::size(kFunnel); ++i) {
    const auto status = status_of(owner(kFunnel[i]));
    os << "  " << std::left << std::setw(10) << kLabels[i] << ' ';
    auto it = m.stage_counts.find(kFunnel[i]);
    if (it != m.stage_counts.end()) {
      os << std::right << std::setw(8) << it->second.output;
    } else {
      os << std::right << std::setw(8) << "-";
    }
    if (status != "complete") os << "  (" << status << ")";
    os << '\n';
  }

  if (auto it = m.stages.find("unify"); it != m.stages.end() && it->second.details.contains("deviation_rejection_rate")) {
    os << "\ndeviation rejection rate  " << std::fixed << std::setprecision(4)
       << it->second.details.at("deviation_rejection_rate").get<double>() << '\n';
  }

  if (auto it = m.stages.find("schedule"); it != m.stages.end() && it->second.details.contains("mix_curve")) {
    const auto& d = it->second.details;
    os << "\nbeta " << d.value("beta", std::string("?")) << "  expected source mix\n";
    const auto& curve = d.at("mix_curve");
    os << "  " << std::setw(10) << "step";
    for (const auto& s : curve.at("sources")) os << std::setw(14) << s.get<std::string>();
    os << '\n';
    const auto& steps = curve.at("steps");
    const auto& probs = curve.at("probabilities");
    for (std::size_t r = 0; r < steps.size(); ++r) {
      os << "  " << std::setw(10) << steps[r].get<std::uint64_t>();
      for (const auto& p : probs[r]) os << std::setw(14) << std::fixed << std::setprecision(4) << p.get<double>();
      os << '\n';
    }
  }
  for (const auto& [name, rec] : m.stages) {
    if (rec.status == "failed") os << "\nstage " << name << " failed: " << rec.error << '\n';
  }
  return os.str();
}

}  // namespace unistage
