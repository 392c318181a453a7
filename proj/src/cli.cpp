#include <atomic>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>

#include <CLI11.hpp>

#include "vigc/analytics.hpp"
#include "vigc/commands.hpp"
#include "vigc/dataset.hpp"
#include "vigc/error.hpp"
#include "vigc/vig.hpp"

namespace vigc {

namespace fs = std::filesystem;
using json = nlohmann::json;
using ordered_json = nlohmann::ordered_json;

std::atomic<bool>& cli_cancel_flag() {
  static std::atomic<bool> flag{false};
  return flag;
}

namespace {

// Flag-independent state that does not live in RunConfig.
struct CliState {
  RunConfig cfg;
  std::string config_path;
  std::string task_name;
  std::string format = "llava_json";
  std::vector<std::string> skip_tasks;
  std::string partial_mode = "cumulative";
  bool no_dedup_guard = false;
  bool bank_replace = false;
  std::vector<std::string> exclude;
  std::vector<std::string> used;
  std::string label = "dataset";
  std::size_t sample_cap = 2000;
  std::string embed_endpoint;
  std::string annotations;
  std::string lexicon;
  std::string field = "both";
  std::string mock_judge;
};

// A CLI option plus the config-file key it can be read from. Options given on
// the command line win over the config file.
struct Binding {
  const char* key;
  CLI::Option* option;
  std::function<void(const json&)> apply;
};

struct Sub {
  CLI::App* app = nullptr;
  std::vector<Binding> bindings;

  template <typename T>
  CLI::Option* opt(const std::string& flags, const char* key, T& var, const std::string& help) {
    auto* o = app->add_option(flags, var, help);
    bindings.push_back({key, o, [&var](const json& j) { var = j.get<T>(); }});
    return o;
  }
};

void add_common(Sub& s, CliState& st) {
  s.app->add_option("--config", st.config_path, "JSON config file; command-line flags win");
  s.opt("--seed", "seed", st.cfg.seed, "RNG seed");
  s.opt("--out", "out", st.cfg.output, "output path");
  s.opt("--max-in-flight", "max_in_flight", st.cfg.max_in_flight, "concurrent backend calls");
}

void add_backend(Sub& s, CliState& st) {
  s.opt("--backend-endpoint", "backend_endpoint", st.cfg.backend_endpoint, "completion endpoint base URL");
  s.opt("--model", "model", st.cfg.model, "model name sent to the endpoint");
  s.opt("--mock-script", "mock_script", st.cfg.mock_script, "scripted mock backend (JSON)");
  s.opt("--max-retries", "max_retries", st.cfg.max_retries, "retries for transport errors");
  s.opt("--timeout", "timeout_seconds", st.cfg.timeout_seconds, "per-request timeout in seconds");
  auto* o = s.app->add_flag("--image-url-mode", st.cfg.image_url_mode, "send image URIs instead of inline bytes");
  s.bindings.push_back({"image_url_mode", o, [&st](const json& j) { st.cfg.image_url_mode = j.get<bool>(); }});
}

void add_bank(Sub& s, CliState& st) {
  s.opt("--task", "task", st.task_name, "conversation | detail | complex | knowledge_vqa (default conversation)");
  s.opt("--bank", "bank", st.cfg.bank_path, "custom template bank (JSON)");
  auto* o = s.app->add_flag("--bank-replace", st.bank_replace, "use only the custom bank");
  s.bindings.push_back({"bank_replace", o, [&st](const json& j) { st.bank_replace = j.get<bool>(); }});
}

void add_correction(Sub& s, CliState& st) {
  s.opt("--max-iters", "max_iters", st.cfg.iqf.max_iterations, "IQF iteration cap");
  auto* o = s.app->add_flag("--no-dedup-guard", st.no_dedup_guard, "allow repeated sentences");
  s.bindings.push_back({"dedup_guard", o, [&st](const json& j) { st.no_dedup_guard = !j.get<bool>(); }});
  s.opt("--temperature", "temperature", st.cfg.iqf.decode.temperature, "correction temperature");
  s.opt("--skip-tasks", "skip_tasks", st.skip_tasks, "task types left uncorrected");
  s.opt("--partial-mode", "partial_mode", st.partial_mode, "cumulative | last");
}

json load_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::IoError, "cannot open config " + path);
  try {
    auto doc = json::parse(in);
    if (!doc.is_object()) throw Error(ErrorCode::ParseError, "config must be a JSON object");
    return doc;
  } catch (const json::parse_error& e) {
    throw Error(ErrorCode::ParseError, path + " at byte offset " + std::to_string(e.byte));
  }
}

void apply_config(const Sub& s, const json& doc) {
  for (const auto& b : s.bindings) {
    if (b.option != nullptr && b.option->count() > 0) continue;
    if (!doc.contains(b.key)) continue;
    try {
      b.apply(doc[b.key]);
    } catch (const json::exception& e) {
      throw Error(ErrorCode::ParseError, std::string("config key ") + b.key + ": " + e.what());
    }
  }
}

void finalize(CliState& st) {
  if (!st.task_name.empty()) st.cfg.task = parse_task(st.task_name);
  for (const auto& t : st.skip_tasks) st.cfg.skip_tasks.insert(parse_task(t));
  st.cfg.iqf.dedup_guard = !st.no_dedup_guard;
  if (st.partial_mode == "cumulative") {
    st.cfg.iqf.partial_mode = PartialMode::Cumulative;
  } else if (st.partial_mode == "last") {
    st.cfg.iqf.partial_mode = PartialMode::LastSentence;
  } else {
    throw Error(ErrorCode::InvalidArgument, "--partial-mode must be cumulative or last");
  }
}

std::shared_ptr<const TemplateBank> bank_for(const CliState& st) {
  if (st.bank_replace) {
    if (st.cfg.bank_path.empty()) throw Error(ErrorCode::InvalidArgument, "--bank-replace needs --bank");
    return std::make_shared<TemplateBank>(load_bank(st.cfg.bank_path));
  }
  return resolve_bank(st.cfg);
}

void write_run_manifest(const CliState& st, const std::string& command, const fs::path& path) {
  auto doc = st.cfg.to_json();
  doc["command"] = command;
  write_json_file(doc, path);
}

fs::path sidecar(const std::string& out) { return fs::path(out + ".run.json"); }

void require(const std::string& value, const char* flag) {
  if (value.empty()) throw Error(ErrorCode::InvalidArgument, std::string("missing required ") + flag);
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::IoError, "cannot write " + path.string());
  out << text;
}

// ---------------------------------------------------------------------------

int cmd_build_train(CliState& st, std::ostream& out) {
  require(st.cfg.input, "--seed-file");
  require(st.cfg.output, "--out");
  if (!fs::exists(st.cfg.input)) throw Error(ErrorCode::IoError, "seed file not found: " + st.cfg.input);
  SeedLoadOptions options;
  if (!st.task_name.empty()) options.task = st.cfg.task;
  auto loaded = load_seed_dataset(st.cfg.input, parse_seed_format(st.format), options);
  auto bank = bank_for(st);

  const fs::path dir = st.cfg.output;
  fs::create_directories(dir);
  auto vig = build_vig_training_set(loaded.records, *bank, st.cfg.seed);
  auto vic = build_vic_training_set(loaded.records);
  write_vig_training_set(vig, dir / "vig_train.jsonl");
  write_vic_training_set(vic, dir / "vic_train.jsonl");

  auto describe = [&](const fs::path& file, std::size_t n, auto counts) {
    DatasetManifest m;
    m.file = file.filename().string();
    m.record_count = n;
    m.counts = counts;
    m.sha256 = file_sha256(file);
    return m.to_json();
  };
  ordered_json manifest;
  manifest["vig_train"] = describe(dir / "vig_train.jsonl", vig.size(), loaded.records_per_task);
  manifest["vic_train"] = describe(dir / "vic_train.jsonl", vic.size(), loaded.records_per_task);
  ordered_json samples = ordered_json::object();
  for (const auto& [t, n] : loaded.samples_per_task) samples[std::string(to_string(t))] = n;
  manifest["source_samples"] = std::move(samples);
  write_json_file(manifest, dir / "dataset_manifest.json");
  write_run_manifest(st, "build-train", dir / "run_manifest.json");

  for (const auto& [t, n] : loaded.samples_per_task) {
    out << to_string(t) << ": samples=" << n << " records=" << loaded.records_per_task[t] << '\n';
  }
  out << "vig_train: " << vig.size() << " samples, vic_train: " << vic.size() << " samples\n";
  return 0;
}

int cmd_filter(CliState& st, std::ostream& out) {
  require(st.cfg.manifest, "--index");
  require(st.cfg.output, "--out");
  auto index = load_image_index(st.cfg.manifest);
  std::set<std::string> exclusion, used;
  for (const auto& p : st.exclude) exclusion.merge(load_id_set(p));
  for (const auto& p : st.used) used.merge(load_id_set(p));
  auto manifest = build_image_manifest(index, exclusion, used, st.cfg.manifest);
  write_image_index(manifest.images, st.cfg.output);
  write_run_manifest(st, "filter", sidecar(st.cfg.output));
  out << "kept " << manifest.images.size() << " of " << index.size() << " images, excluded "
      << manifest.excluded_count << '\n';
  return 0;
}

int cmd_generate(CliState& st, std::ostream& out) {
  require(st.cfg.manifest, "--manifest");
  require(st.cfg.output, "--out");
  st.cfg.validate();
  auto backend = make_completion_backend(st.cfg);
  VigConfig vig;
  vig.task = st.cfg.task;
  vig.bank = bank_for(st);
  vig.decode = st.cfg.gen_decode;
  vig.seed = st.cfg.seed;
  vig.max_parse_retries = st.cfg.max_parse_retries;
  auto images = load_image_index(st.cfg.manifest);
  BatchOptions options;
  options.max_in_flight = st.cfg.max_in_flight;
  options.cancel = &cli_cancel_flag();
  auto slots = generate_batch(images, vig, *backend, options);
  std::vector<GenerationRecord> records;
  for (auto& s : slots) {
    if (s) records.push_back(std::move(*s));
  }
  write_records(records, st.cfg.output);
  write_run_manifest(st, "generate", sidecar(st.cfg.output));
  out << "summary: " << summarize_records(records).dump() << '\n';
  return 0;
}

int cmd_correct(CliState& st, std::ostream& out) {
  require(st.cfg.input, "--in");
  require(st.cfg.output, "--out");
  st.cfg.validate();
  auto backend = make_completion_backend(st.cfg);
  auto records = read_records(st.cfg.input);
  CorrectOptions options;
  options.iqf = st.cfg.iqf;
  options.skip_tasks = st.cfg.skip_tasks;
  options.max_in_flight = st.cfg.max_in_flight;
  options.cancel = &cli_cancel_flag();
  records = correct_stream(std::move(records), options, *backend);
  write_records(records, st.cfg.output);
  write_run_manifest(st, "correct", sidecar(st.cfg.output));
  out << "summary: " << summarize_records(records).dump() << '\n';
  return 0;
}

int cmd_pipeline(CliState& st, std::ostream& out) {
  st.cfg.validate();
  if (st.bank_replace) throw Error(ErrorCode::InvalidArgument, "pipeline extends the built-in bank; drop --bank-replace");
  auto backend = make_completion_backend(st.cfg);
  run_pipeline(st.cfg, *backend, out, &cli_cancel_flag());
  return 0;
}

int cmd_stats(CliState& st, std::ostream& out) {
  require(st.cfg.input, "--in");
  require(st.cfg.output, "--out");
  auto records = read_records(st.cfg.input);
  std::shared_ptr<EmbeddingBackend> embedder;
  if (st.embed_endpoint.empty()) {
    embedder = std::make_shared<HashingEmbedder>();
  } else {
    auto http = HttpConfig::with_env(st.embed_endpoint, st.cfg.model);
    http.timeout_seconds = st.cfg.timeout_seconds;
    RetryPolicy policy;
    policy.max_retries = st.cfg.max_retries;
    embedder = std::make_shared<RetryingEmbedder>(std::make_shared<HttpEmbedder>(http), policy);
  }
  StatsOptions options;
  options.sample_cap = st.sample_cap;
  options.seed = st.cfg.seed;
  auto report = compute_stats(records, *embedder, options);

  const fs::path dir = st.cfg.output;
  fs::create_directories(dir);
  auto doc = stats_to_json(report);
  doc["label"] = st.label;
  write_json_file(doc, dir / "stats.json");
  std::vector<std::pair<std::string, StatsReport>> rows{{st.label, report}};
  auto table = stats_table(rows);
  write_text(dir / "stats.txt", table);
  write_run_manifest(st, "stats", dir / "run_manifest.json");
  out << table;
  return 0;
}

int cmd_audit(CliState& st, std::ostream& out) {
  require(st.cfg.input, "--in");
  require(st.annotations, "--annotations");
  require(st.cfg.output, "--out");
  auto records = read_records(st.cfg.input);
  auto annotations = AnnotationSet::load(st.annotations);
  auto lexicon = st.lexicon.empty() ? NounLexicon::coco_default() : NounLexicon::load(st.lexicon);

  std::vector<std::pair<std::string, HallucinationReport>> rows;
  if (st.field == "vig" || st.field == "both") {
    rows.emplace_back("VIG", audit_hallucinations(records, annotations, lexicon, AnswerField::Vig));
  }
  if (st.field == "vic" || st.field == "both") {
    rows.emplace_back("VIC", audit_hallucinations(records, annotations, lexicon, AnswerField::Vic));
  }
  if (rows.empty()) throw Error(ErrorCode::InvalidArgument, "--field must be vig, vic or both");

  const fs::path dir = st.cfg.output;
  fs::create_directories(dir);
  ordered_json doc;
  for (const auto& [label, report] : rows) doc[label == "VIG" ? "vig" : "vic"] = hallucination_to_json(report);
  write_json_file(doc, dir / "audit.json");
  auto table = hallucination_table(rows);
  write_text(dir / "audit.txt", table);
  write_run_manifest(st, "audit", dir / "run_manifest.json");
  out << table;
  return 0;
}

int cmd_judge(CliState& st, std::ostream& out) {
  require(st.cfg.input, "--in");
  require(st.cfg.output, "--out");
  auto items = load_judge_items(st.cfg.input);
  std::shared_ptr<JudgeBackend> judge;
  if (!st.mock_judge.empty()) {
    std::ifstream in(st.mock_judge);
    if (!in) throw Error(ErrorCode::IoError, "cannot open mock judge " + st.mock_judge);
    json doc;
    try {
      doc = json::parse(in);
    } catch (const json::parse_error& e) {
      throw Error(ErrorCode::ParseError, st.mock_judge + " at byte offset " + std::to_string(e.byte));
    }
    judge = std::make_shared<MockJudge>(MockJudge::from_json(doc));
  } else {
    judge = std::make_shared<CompletionJudge>(make_completion_backend(st.cfg));
  }
  auto judged = run_judging(items, *judge, st.cfg.max_in_flight);
  auto scores = relative_score(judged);

  const fs::path dir = st.cfg.output;
  fs::create_directories(dir);
  write_json_file(relative_scores_to_json(scores, judged), dir / "judge.json");
  std::ostringstream table;
  table.setf(std::ios::fixed);
  table.precision(1);
  for (const auto& [category, value] : scores.per_category) table << category << ": " << value << '\n';
  table << "overall: " << scores.overall << '\n';
  write_text(dir / "judge.txt", table.str());
  write_run_manifest(st, "judge", dir / "run_manifest.json");
  out << table.str();
  return 0;
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CliState st;
  CLI::App app{"Visual instruction generation and correction toolkit", "vigc"};
  app.require_subcommand(1, 1);

  std::map<std::string, Sub> subs;
  std::map<std::string, std::function<int(CliState&, std::ostream&)>> handlers;
  auto make = [&](const std::string& name, const std::string& help, auto handler) -> Sub& {
    auto& s = subs[name];
    s.app = app.add_subcommand(name, help);
    add_common(s, st);
    handlers[name] = handler;
    return s;
  };

  {
    auto& s = make("build-train", "build VIG and VIC training corpora from seed data", cmd_build_train);
    s.opt("--seed-file", "seed_file", st.cfg.input, "seed dataset");
    s.opt("--format", "format", st.format, "llava_json | qa_jsonl");
    add_bank(s, st);
  }
  {
    auto& s = make("filter", "build an image manifest with exclusions", cmd_filter);
    s.opt("--index", "index", st.cfg.manifest, "image index (JSONL)");
    s.opt("--exclude", "exclude", st.exclude, "ids to exclude (test sets)");
    s.opt("--used", "used", st.used, "ids already used by seed data");
  }
  {
    auto& s = make("generate", "VIG: generate question/answer pairs", cmd_generate);
    s.opt("--manifest", "manifest", st.cfg.manifest, "image manifest (JSONL)");
    add_backend(s, st);
    add_bank(s, st);
    s.opt("--temperature", "gen_temperature", st.cfg.gen_decode.temperature, "generation temperature");
    s.opt("--max-new-tokens", "max_new_tokens", st.cfg.gen_decode.max_new_tokens, "token cap per call");
    s.opt("--max-parse-retries", "max_parse_retries", st.cfg.max_parse_retries, "redraws after unparsable output");
  }
  {
    auto& s = make("correct", "VIC: iteratively correct answers", cmd_correct);
    s.opt("--in", "in", st.cfg.input, "records (JSONL)");
    add_backend(s, st);
    add_correction(s, st);
    s.opt("--max-new-tokens", "max_new_tokens", st.cfg.iqf.decode.max_new_tokens, "token cap per call");
  }
  {
    auto& s = make("pipeline", "generate then correct, resumable", cmd_pipeline);
    s.opt("--manifest", "manifest", st.cfg.manifest, "image manifest (JSONL)");
    add_backend(s, st);
    add_bank(s, st);
    add_correction(s, st);
    s.opt("--gen-temperature", "gen_temperature", st.cfg.gen_decode.temperature, "generation temperature");
    s.opt("--max-parse-retries", "max_parse_retries", st.cfg.max_parse_retries, "redraws after unparsable output");
  }
  {
    auto& s = make("stats", "length, diversity and prefix statistics", cmd_stats);
    s.opt("--in", "in", st.cfg.input, "records (JSONL)");
    s.opt("--label", "label", st.label, "row label");
    s.opt("--sample-cap", "sample_cap", st.sample_cap, "exact all-pairs up to this many questions");
    s.opt("--embed-endpoint", "embed_endpoint", st.embed_endpoint, "remote embedder; default hashing");
    s.opt("--max-retries", "max_retries", st.cfg.max_retries, "retries for transport errors");
  }
  {
    auto& s = make("audit", "annotation-grounded hallucination audit", cmd_audit);
    s.opt("--in", "in", st.cfg.input, "records (JSONL)");
    s.opt("--annotations", "annotations", st.annotations, "annotation set (JSON)");
    s.opt("--lexicon", "lexicon", st.lexicon, "noun lexicon; default COCO categories");
    s.opt("--field", "field", st.field, "vig | vic | both");
  }
  {
    auto& s = make("judge", "relative scores from a judge backend", cmd_judge);
    s.opt("--in", "in", st.cfg.input, "judge items (JSONL)");
    s.opt("--mock-judge", "mock_judge", st.mock_judge, "scripted judge (JSON)");
    add_backend(s, st);
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e, out, err);
    return code == 0 ? 0 : 2;
  }

  try {
    for (auto& [name, s] : subs) {
      if (!s.app->parsed()) continue;
      if (!st.config_path.empty()) apply_config(s, load_config_file(st.config_path));
      finalize(st);
      return handlers[name](st, out);
    }
  } catch (const Error& e) {
    err << "vigc: " << e.what() << '\n';
    return exit_code_for(e.code());
  } catch (const fs::filesystem_error& e) {
    err << "vigc: " << e.what() << '\n';
    return 1;
  }
  return 2;
}

}  // namespace vigc
