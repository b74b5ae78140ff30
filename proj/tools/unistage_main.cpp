// Copyright 2026 The unistage Authors
// SPDX-License-Identifier: Apache-2.0

// unistage: command-line front end for the data pipeline and evaluation kit.
//
// Exit codes: 0 success, 1 validation error, 2 stage failure, 3 backend exhaustion.

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <numeric>
#include <sstream>

#include "unistage/curation.hpp"
#include "unistage/error.hpp"
#include "unistage/evalkit.hpp"
#include "unistage/fidelity.hpp"
#include "unistage/jsonl.hpp"
#include "unistage/packer.hpp"
#include "unistage/pipeline.hpp"
#include "unistage/sampler.hpp"

namespace fs = std::filesystem;
using json = nlohmann::json;
using namespace unistage;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitValidation = 1;
constexpr int kExitStage = 2;
constexpr int kExitBackend = 3;

std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw IoError("cannot read " + p.string());
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

json read_json_file(const fs::path& p) {
  try {
    return json::parse(read_file(p));
  } catch (const json::exception& e) {
    throw ValidationError(p.string() + ": " + e.what());
  }
}

void write_text(const fs::path& p, const std::string& body) {
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
  detail::atomic_write(p, body);
}

// "stub" or a JSON file holding one backend definition.
std::unique_ptr<LlmBackend> backend_from_arg(const std::string& arg) {
  if (arg == "stub") return make_backend(BackendConfig{});
  BackendConfig bc = read_json_file(arg).get<BackendConfig>();
  if (!bc.cassette_path.empty() && fs::path(bc.cassette_path).is_relative()) {
    bc.cassette_path = (fs::path(arg).parent_path() / bc.cassette_path).string();
  }
  return make_backend(bc);
}

// Options shared by the stage subcommands: a config file plus overrides.
// Precedence is flags > config > defaults; the resolved values end up in the manifest.
struct StageArgs {
  std::string config;
  std::string in_dir;
  std::string out_dir;
  std::optional<std::uint64_t> seed;

  void add(CLI::App* cmd) {
    cmd->add_option("--config", config, "Pipeline config file (JSON)");
    cmd->add_option("--in", in_dir, "Input directory");
    cmd->add_option("--out", out_dir, "Output directory");
    cmd->add_option("--seed", seed, "Global seed");
  }

  PipelineConfig load() const {
    PipelineConfig cfg;
    if (!config.empty()) {
      cfg = load_config(config);
    } else {
      cfg.base_dir = fs::current_path();
    }
    // Directory flags are relative to the working directory, not the config file.
    if (!in_dir.empty()) cfg.paths.input_dir = fs::absolute(in_dir).string();
    if (!out_dir.empty()) cfg.paths.output_dir = fs::absolute(out_dir).string();
    if (seed) cfg.seed = *seed;
    return cfg;
  }
};

RunManifest run_stages(PipelineConfig& cfg, const std::set<Stage>& stages) {
  cfg.validate();
  auto m = run(cfg, stages);
  std::cout << report(m);
  return m;
}

// ---------------------------------------------------------------------------
// Sources spec for schedule / schedule-stats:
//   {"sources": [{"name": "web", "priority_exponent": 5, "epochs": 3,
//                 "items": [...] | "count": N | "records": "file.jsonl"}]}
// Missing exponents default from the name (doc class or "sft").

std::vector<DataSource> load_sources(const fs::path& path) {
  const auto spec = read_json_file(path);
  std::vector<DataSource> out;
  for (const auto& s : spec.at("sources")) {
    for (const auto& [k, _] : s.items()) {
      static const std::set<std::string> kKeys{"name", "priority_exponent", "epochs", "items", "count", "records"};
      if (!kKeys.contains(k)) throw ValidationError("sources: unknown key '" + k + "'");
    }
    DataSource src;
    src.name = s.at("name").get<std::string>();
    if (s.contains("priority_exponent")) {
      src.priority_exponent = s.at("priority_exponent").get<std::uint32_t>();
    } else if (src.name == "sft") {
      src.priority_exponent = kFineTuningPriority;
    } else {
      src.priority_exponent = default_priority(parse_doc_class(src.name));
    }
    src.epochs = s.value("epochs", src.name == "sft" ? kFineTuningEpochs : kPretrainEpochs);
    if (s.contains("items")) {
      src.items = s.at("items").get<std::vector<std::string>>();
    } else if (s.contains("count")) {
      const auto n = s.at("count").get<std::size_t>();
      for (std::size_t i = 0; i < n; ++i) src.items.push_back(src.name + "/" + std::to_string(i));
    } else if (s.contains("records")) {
      fs::path rp = s.at("records").get<std::string>();
      if (rp.is_relative()) rp = path.parent_path() / rp;
      for (const auto& r : read_records_strict<InstructionRecord>(rp)) src.items.push_back(r.id);
    }
    validate(src);
    out.push_back(std::move(src));
  }
  return out;
}

std::vector<Beta> parse_betas(const std::string& list) {
  std::vector<Beta> out;
  std::stringstream ss(list);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (!item.empty()) out.push_back(Beta::parse(item));
  }
  if (out.empty()) throw ValidationError("empty beta list");
  return out;
}

std::string fmt(double v, int precision = 4) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(precision) << v;
  return os.str();
}

std::map<std::string, std::string> read_responses(const fs::path& p, std::vector<std::pair<std::string, std::string>>* questions,
                                                  bool multi_round) {
  std::map<std::string, std::string> out;
  for (const auto& j : read_records_strict<json>(p)) {
    const auto id = j.at("id").get<std::string>();
    std::string text;
    if (j.contains("response")) {
      text = j.at("response").get<std::string>();
    } else if (multi_round && j.contains("turns")) {
      Transcript t;
      t.turns = j.at("turns").get<std::vector<ChatTurn>>();
      text = render_transcript(t);
    } else {
      throw ValidationError(p.string() + ": item " + id + " has no response");
    }
    if (!out.emplace(id, text).second) throw ValidationError(p.string() + ": duplicate id " + id);
    if (questions) questions->emplace_back(id, j.value("question", std::string{}));
  }
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"unistage: domain corpus to packed instruction data, plus evaluation"};
  app.set_version_flag("--version", std::string(tool_version()));
  app.require_subcommand(1);

  // run ----------------------------------------------------------------------
  auto* run_cmd = app.add_subcommand("run", "Run pipeline stages from a config file");
  StageArgs run_args;
  run_args.add(run_cmd);
  std::string stages_arg;
  run_cmd->add_option("--stages", stages_arg, "Comma-separated subset of curate,unify,schedule,pack");
  run_cmd->callback([&] {
    auto cfg = run_args.load();
    const auto stages = parse_stages(stages_arg);
    run_stages(cfg, stages);
  });

  // curate -------------------------------------------------------------------
  auto* curate_cmd = app.add_subcommand("curate", "Extract, segment, clean and de-duplicate documents");
  StageArgs curate_args;
  curate_args.add(curate_cmd);
  std::optional<std::string> c_dict, c_docs, c_method;
  std::optional<double> c_density, c_dedup, c_quality;
  std::optional<std::size_t> c_window, c_flank;
  curate_cmd->add_option("--dict", c_dict, "Dictionary file (one term per line)");
  curate_cmd->add_option("--documents", c_docs, "Documents file inside the input directory");
  curate_cmd->add_option("--density-threshold", c_density);
  curate_cmd->add_option("--window", c_window, "Window limit in tokens");
  curate_cmd->add_option("--flank", c_flank, "Sentences shared with each neighbouring window");
  curate_cmd->add_option("--quality-threshold", c_quality);
  curate_cmd->add_option("--dedup-threshold", c_dedup);
  curate_cmd->add_option("--dedup-method", c_method, "ngram_jaccard | embedding");
  curate_cmd->callback([&] {
    auto cfg = curate_args.load();
    if (c_dict) cfg.paths.dictionary = fs::absolute(*c_dict).string();
    if (c_docs) cfg.paths.documents = *c_docs;
    if (c_density) cfg.curate.density_threshold = *c_density;
    if (c_window) cfg.curate.window = *c_window;
    if (c_flank) cfg.curate.flank = *c_flank;
    if (c_quality) cfg.curate.quality_threshold = *c_quality;
    if (c_dedup) cfg.curate.dedup_threshold = *c_dedup;
    if (c_method) cfg.curate.dedup_method = parse_dedup_method(*c_method);
    run_stages(cfg, {Stage::curate});
  });

  // calibrate ----------------------------------------------------------------
  auto* cal_cmd = app.add_subcommand("calibrate", "Keep rate of the domain filter across density thresholds");
  std::string cal_dict, cal_docs, cal_thresholds = "0,0.005,0.01,0.02,0.03,0.05,0.1,0.2,0.3,0.5";
  std::size_t cal_sample = 0;
  cal_cmd->add_option("--dict", cal_dict)->required();
  cal_cmd->add_option("--documents", cal_docs)->required();
  cal_cmd->add_option("--thresholds", cal_thresholds, "Comma-separated thresholds");
  cal_cmd->add_option("--sample", cal_sample, "Use only the first N documents (0 = all)");
  cal_cmd->callback([&] {
    auto docs = read_records<Document>(cal_docs).records;
    if (cal_sample && docs.size() > cal_sample) docs.resize(cal_sample);
    const auto dict = DomainDictionary::load(cal_dict);
    const UnigramTokenizer tok;
    std::vector<double> dens;
    for (const auto& d : docs) dens.push_back(score_density(d, dict, tok).density);
    std::cout << "threshold\tkept\tkeep_rate\n";
    std::stringstream ss(cal_thresholds);
    std::string item;
    while (std::getline(ss, item, ',')) {
      const double t = std::stod(item);
      const auto kept = std::count_if(dens.begin(), dens.end(), [&](double x) { return x >= t; });
      std::cout << item << '\t' << kept << '\t'
                << fmt(docs.empty() ? 0.0 : static_cast<double>(kept) / static_cast<double>(docs.size())) << '\n';
    }
  });

  // unify --------------------------------------------------------------------
  auto* unify_cmd = app.add_subcommand("unify", "Rewrite segments into instruction-output records");
  StageArgs unify_args;
  unify_args.add(unify_cmd);
  std::optional<std::string> u_backend, u_cassette;
  std::optional<std::uint32_t> u_attempts;
  std::optional<double> u_threshold;
  std::optional<std::size_t> u_in_flight;
  bool u_record = false;
  unify_cmd->add_option("--backend", u_backend, "stub | cassette | http")
      ->check(CLI::IsMember({"stub", "cassette", "http"}));
  unify_cmd->add_option("--cassette", u_cassette, "Cassette file for --backend cassette");
  unify_cmd->add_flag("--record", u_record, "Record the cassette through the configured http backend");
  unify_cmd->add_option("--max-attempts", u_attempts);
  unify_cmd->add_option("--deviation-threshold", u_threshold);
  unify_cmd->add_option("--in-flight", u_in_flight);
  unify_cmd->callback([&] {
    auto cfg = unify_args.load();
    auto& bc = cfg.backends[cfg.unify_backend];
    if (u_backend) bc.kind = parse_backend_kind(*u_backend);
    if (u_cassette) bc.cassette_path = fs::absolute(*u_cassette).string();
    if (u_record) bc.cassette_record = true;
    if (u_attempts) cfg.unify.max_attempts = *u_attempts;
    if (u_threshold) cfg.unify.deviation_threshold = *u_threshold;
    if (u_in_flight) cfg.unify.in_flight = *u_in_flight;
    run_stages(cfg, {Stage::unify});
  });

  // fidelity -----------------------------------------------------------------
  auto* fid_cmd = app.add_subcommand("fidelity", "Check an answer against its source text");
  std::string f_method = "jaccard", f_judge = "stub", f_source, f_answer;
  double f_threshold = 0.35;
  fid_cmd->add_option("--method", f_method, "jaccard | judge")->check(CLI::IsMember({"jaccard", "judge"}));
  fid_cmd->add_option("--threshold", f_threshold);
  fid_cmd->add_option("--judge", f_judge, "Judge backend: 'stub' or a backend JSON file");
  fid_cmd->add_option("source", f_source, "Source text file")->required();
  fid_cmd->add_option("answer", f_answer, "Answer text file")->required();
  fid_cmd->callback([&] {
    const UnigramTokenizer tok;
    std::unique_ptr<LlmBackend> judge;
    FidelityChecker::Options opts;
    opts.method = parse_fidelity_method(f_method);
    opts.threshold = f_threshold;
    if (opts.method == FidelityMethod::model_judge) judge = backend_from_arg(f_judge);
    const FidelityChecker checker(opts, &tok, judge.get());
    const auto v = checker.check(read_file(f_source), read_file(f_answer));
    json out = {{"passed", v.passed}, {"score", v.score}, {"method", to_string(v.method)}, {"reason", v.reason}};
    std::cout << out.dump(2) << '\n';
  });

  // schedule -----------------------------------------------------------------
  auto* sched_cmd = app.add_subcommand("schedule", "Emit a priority-sampled training order");
  std::string s_beta = "2", s_sources, s_out;
  std::uint64_t s_seed = 0;
  bool s_strict = false;
  std::size_t s_bins = 20;
  sched_cmd->add_option("--beta", s_beta, "Relative priority (decimal)");
  sched_cmd->add_option("--seed", s_seed);
  sched_cmd->add_option("--sources", s_sources, "Sources spec file (JSON)")->required();
  sched_cmd->add_option("--out", s_out, "Schedule output file")->required();
  sched_cmd->add_option("--bins", s_bins, "Prefix bins in the summary");
  sched_cmd->add_flag("--strict-beta-zero", s_strict, "Read beta 0 literally");
  sched_cmd->callback([&] {
    const auto sources = load_sources(s_sources);
    SamplerOptions so;
    so.zero_beta = s_strict ? ZeroBeta::strict : ZeroBeta::as_uniform;
    const auto beta = Beta::parse(s_beta);
    if (beta.is_zero() && !s_strict) std::cerr << "warning: beta 0 read as uniform priorities (beta 1)\n";
    const auto schedule = build_schedule(sources, beta, s_seed, so, s_bins);
    std::vector<json> lines;
    for (const auto& e : schedule.entries) lines.push_back(schedule_entry_json(schedule, e));
    const auto frag = write_records(lines, s_out);
    json summary = schedule.summary;
    write_text(s_out + ".summary.json", summary.dump(2) + "\n");
    std::cout << "wrote " << frag.count << " entries to " << s_out << " (sha256 " << frag.digest << ")\n";
    for (std::size_t i = 0; i < schedule.summary.frozen.size(); ++i) {
      if (schedule.summary.frozen[i]) {
        std::cout << "frozen: " << schedule.summary.sources[i] << ' ' << schedule.summary.frozen[i] << '\n';
      }
    }
  });

  // schedule-stats -----------------------------------------------------------
  auto* stats_cmd = app.add_subcommand("schedule-stats", "Plot-ready mix histogram, completion steps, beta sweep");
  std::string st_beta = "2", st_betas, st_sources, st_out;
  std::uint64_t st_seed = 0;
  std::size_t st_bins = 20;
  stats_cmd->add_option("--beta", st_beta);
  stats_cmd->add_option("--betas", st_betas, "Comma-separated betas for a sweep");
  stats_cmd->add_option("--seed", st_seed);
  stats_cmd->add_option("--bins", st_bins);
  stats_cmd->add_option("--sources", st_sources, "Sources spec file (JSON)")->required();
  stats_cmd->add_option("--out", st_out, "Write the table here instead of stdout");
  stats_cmd->callback([&] {
    const auto sources = load_sources(st_sources);
    std::ostringstream os;
    if (!st_betas.empty()) {
      const auto rows = beta_sweep(sources, parse_betas(st_betas), st_seed);
      os << "beta\ttau";
      for (const auto& s : sources) os << "\tcompletion_" << s.name;
      for (const auto& s : sources) os << "\tmean_position_" << s.name;
      os << '\n';
      for (const auto& r : rows) {
        os << r.beta.str() << '\t' << fmt(r.tau, 6);
        for (const auto& c : r.completion_step) os << '\t' << (c ? std::to_string(*c) : "-");
        for (double p : r.mean_position) os << '\t' << fmt(p);
        os << '\n';
      }
    } else {
      const auto schedule = build_schedule(sources, Beta::parse(st_beta), st_seed, {}, st_bins);
      const auto& sm = schedule.summary;
      os << "end_step";
      for (const auto& n : sm.sources) os << '\t' << n;
      os << '\n';
      for (const auto& b : sm.bins) {
        const auto width = static_cast<double>(std::accumulate(b.counts.begin(), b.counts.end(), std::uint64_t{0}));
        os << b.end_step;
        for (auto c : b.counts) os << '\t' << fmt(width > 0 ? static_cast<double>(c) / width : 0.0);
        os << '\n';
      }
      os << "\nsource\tpriority_exponent\ttotal\tcompletion_step\n";
      for (std::size_t i = 0; i < sm.sources.size(); ++i) {
        os << sm.sources[i] << '\t' << sm.exponents[i] << '\t' << sm.totals[i] << '\t'
           << (sm.completion_step[i] ? std::to_string(*sm.completion_step[i]) : "-") << '\n';
      }
    }
    if (st_out.empty()) {
      std::cout << os.str();
    } else {
      write_text(st_out, os.str());
    }
  });

  // pack ---------------------------------------------------------------------
  auto* pack_cmd = app.add_subcommand("pack", "Pack scheduled records into fixed-length sequences");
  StageArgs pack_args;
  pack_args.add(pack_cmd);
  std::optional<std::size_t> p_length;
  std::optional<std::string> p_tokenizer;
  pack_cmd->add_option("--length", p_length, "Sequence length");
  pack_cmd->add_option("--tokenizer", p_tokenizer, "desk | path to a vocabulary spec");
  pack_cmd->callback([&] {
    auto cfg = pack_args.load();
    if (p_length) cfg.pack.length = *p_length;
    if (p_tokenizer) cfg.pack.tokenizer = *p_tokenizer == "desk" ? "desk" : fs::absolute(*p_tokenizer).string();
    run_stages(cfg, {Stage::pack});
  });

  // eval ---------------------------------------------------------------------
  auto* eval_cmd = app.add_subcommand("eval", "Benchmark scoring and pairwise judging");
  eval_cmd->require_subcommand(1);

  auto* mc_cmd = eval_cmd->add_subcommand("mc", "Score multiple-choice responses");
  std::string mc_items, mc_responses, mc_lang = "zh", mc_out, mc_prompts;
  bool mc_partial = false;
  mc_cmd->add_option("--items", mc_items, "EvalItem records")->required();
  mc_cmd->add_option("--responses", mc_responses, "Records of {id, response}");
  mc_cmd->add_option("--lang", mc_lang, "Prompt language")->check(CLI::IsMember({"zh", "en"}));
  mc_cmd->add_option("--prompts-out", mc_prompts, "Write rendered prompts as {id, prompt} records");
  mc_cmd->add_flag("--partial-credit", mc_partial, "Partial credit on multiple-answer items");
  mc_cmd->add_option("--out", mc_out, "Structured score table (JSON)");
  mc_cmd->callback([&] {
    const auto items = read_records_strict<EvalItem>(mc_items);
    if (!mc_prompts.empty()) {
      std::vector<json> prompts;
      for (const auto& it : items) prompts.push_back({{"id", it.id}, {"prompt", build_mc_prompt(it, parse_language(mc_lang))}});
      write_records(prompts, mc_prompts);
    }
    if (mc_responses.empty()) {
      if (mc_prompts.empty()) throw ValidationError("eval mc: --responses or --prompts-out is required");
      return;
    }
    const auto responses = read_responses(mc_responses, nullptr, false);
    std::map<std::string, Extraction> ext;
    for (const auto& it : items) {
      auto r = responses.find(it.id);
      if (r == responses.end()) throw ValidationError("eval mc: no response for item " + it.id);
      ext[it.id] = extract_choice(r->second, it.labels(), it.is_multi());
    }
    const auto table = score(items, ext, mc_partial ? MultiScoring::partial_credit : MultiScoring::exact_set);
    if (!mc_out.empty()) {
      json j = table;
      json per_item = json::array();
      for (const auto& it : items) {
        per_item.push_back({{"id", it.id}, {"labels", ext[it.id].labels}, {"rule", to_string(ext[it.id].rule)}});
      }
      j["extractions"] = per_item;
      write_text(mc_out, j.dump(2) + "\n");
    }
    std::cout << render_score_table(table);
  });

  auto* pw_cmd = eval_cmd->add_subcommand("pairwise", "Judge two models' responses in both orders");
  std::string pw_a, pw_b, pw_judge = "stub", pw_out, pw_name_a, pw_name_b;
  bool pw_multi = false;
  std::size_t pw_in_flight = 1;
  pw_cmd->add_option("--a", pw_a, "Model 1 responses {id, question, response}")->required();
  pw_cmd->add_option("--b", pw_b, "Model 2 responses {id, response}")->required();
  pw_cmd->add_option("--judge", pw_judge, "Judge backend: 'stub' or a backend JSON file");
  pw_cmd->add_option("--name-a", pw_name_a);
  pw_cmd->add_option("--name-b", pw_name_b);
  pw_cmd->add_flag("--multi-round", pw_multi, "Responses are whole conversations");
  pw_cmd->add_option("--in-flight", pw_in_flight);
  pw_cmd->add_option("--out", pw_out, "Structured result (JSON)");
  pw_cmd->callback([&] {
    std::vector<std::pair<std::string, std::string>> questions;
    const auto r1 = read_responses(pw_a, &questions, pw_multi);
    const auto r2 = read_responses(pw_b, nullptr, pw_multi);
    const auto cases = align_responses(questions, r1, r2);
    auto judge = backend_from_arg(pw_judge);
    PairwiseOptions opts;
    opts.multi_round = pw_multi;
    opts.in_flight = pw_in_flight;
    opts.model1 = pw_name_a.empty() ? fs::path(pw_a).stem().string() : pw_name_a;
    opts.model2 = pw_name_b.empty() ? fs::path(pw_b).stem().string() : pw_name_b;
    const auto result = pairwise_judge(cases, *judge, opts);
    judge->flush();
    if (!pw_out.empty()) write_text(pw_out, json(result).dump(2) + "\n");
    std::cout << render_comparison(result);
  });

  auto* dlg_cmd = eval_cmd->add_subcommand("dialogue", "Simulated patient conversations for multi-round judging");
  std::string dlg_cases, dlg_doctor = "stub", dlg_patient = "stub", dlg_out;
  std::size_t dlg_turns = 2;
  dlg_cmd->add_option("--cases", dlg_cases, "Records of {id, case}")->required();
  dlg_cmd->add_option("--doctor", dlg_doctor, "Doctor backend: 'stub' or a backend JSON file");
  dlg_cmd->add_option("--patient", dlg_patient, "Patient backend: 'stub' or a backend JSON file");
  dlg_cmd->add_option("--turns", dlg_turns, "Doctor messages per dialogue");
  dlg_cmd->add_option("--out", dlg_out, "Transcripts {id, turns, aborted}")->required();
  dlg_cmd->callback([&] {
    auto doctor = backend_from_arg(dlg_doctor);
    auto patient = backend_from_arg(dlg_patient);
    std::vector<json> out;
    std::size_t aborted = 0;
    for (const auto& c : read_records_strict<json>(dlg_cases)) {
      DialogueOptions opts;
      opts.turns = dlg_turns;
      opts.id = c.at("id").get<std::string>();
      const auto t = simulate_patient_dialogue(c.at("case").get<std::string>(), *doctor, *patient, opts);
      aborted += t.aborted ? 1 : 0;
      json j = t;
      j["id"] = opts.id;
      j["response"] = render_transcript(t);
      out.push_back(j);
    }
    doctor->flush();
    patient->flush();
    write_records(out, dlg_out);
    std::cout << "dialogues " << out.size() << ", aborted " << aborted << '\n';
  });

  // report -------------------------------------------------------------------
  auto* rep_cmd = app.add_subcommand("report", "Summarize a run manifest");
  std::string rep_manifest;
  rep_cmd->add_option("manifest", rep_manifest, "manifest.json or an output directory")->required();
  rep_cmd->callback([&] {
    fs::path p = rep_manifest;
    if (fs::is_directory(p)) p /= outputs::kManifest;
    std::cout << report(read_manifest(p));
  });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitValidation;
  } catch (const BackendExhausted& e) {
    std::cerr << "backend exhausted: " << e.what() << '\n';
    return kExitBackend;
  } catch (const ValidationError& e) {
    std::cerr << "validation error: " << e.what() << '\n';
    return kExitValidation;
  } catch (const json::exception& e) {
    std::cerr << "validation error: " << e.what() << '\n';
    return kExitValidation;
  } catch (const std::exception& e) {
    std::cerr << "stage failure: " << e.what() << '\n';
    return kExitStage;
  }
  return kExitOk;
}
