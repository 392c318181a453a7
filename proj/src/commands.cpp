#include "vigc/commands.hpp"

#include <cstdio>
#include <map>
#include <optional>

#include "vigc/dataset.hpp"
#include "vigc/error.hpp"
#include "vigc/rng.hpp"
#include "vigc/vig.hpp"
#include "vigc/worker_pool.hpp"

namespace vigc {

namespace fs = std::filesystem;
using ordered_json = nlohmann::ordered_json;

void RunConfig::validate() const {
  if (max_in_flight < 1) throw Error(ErrorCode::InvalidArgument, "--max-in-flight must be >= 1");
  if (max_retries < 0) throw Error(ErrorCode::InvalidArgument, "--max-retries must be >= 0");
  if (max_parse_retries < 0) throw Error(ErrorCode::InvalidArgument, "--max-parse-retries must be >= 0");
  gen_decode.validate();
  iqf.validate();
  std::set<fs::path> seen;
  for (const auto* p : {&input, &manifest, &output, &bank_path, &mock_script}) {
    if (p->empty()) continue;
    if (!seen.insert(fs::absolute(*p).lexically_normal()).second) {
      throw Error(ErrorCode::InvalidArgument, "path " + *p + " is used for more than one role");
    }
  }
}

ordered_json RunConfig::to_json() const {
  auto decode_json = [](const DecodeParams& d) {
    ordered_json j;
    j["max_new_tokens"] = d.max_new_tokens;
    j["temperature"] = d.temperature;
    j["stop"] = d.stop_sequences;
    j["seed"] = d.seed ? ordered_json(*d.seed) : ordered_json(nullptr);
    return j;
  };
  ordered_json j;
  j["tool_version"] = kToolVersion;
  j["backend_endpoint"] = backend_endpoint;
  j["model"] = model;
  j["mock_script"] = mock_script;
  j["api_key"] = std::getenv("VIGC_API_KEY") != nullptr ? ordered_json("<redacted>") : ordered_json(nullptr);
  j["bank"] = bank_path;
  j["task"] = to_string(task);
  j["generation_decode"] = decode_json(gen_decode);
  j["max_parse_retries"] = max_parse_retries;
  ordered_json iqf_json;
  iqf_json["max_iterations"] = iqf.max_iterations;
  iqf_json["dedup_guard"] = iqf.dedup_guard;
  iqf_json["partial_mode"] = iqf.partial_mode == PartialMode::Cumulative ? "cumulative" : "last";
  iqf_json["decode"] = decode_json(iqf.decode);
  j["iqf"] = std::move(iqf_json);
  auto skip = ordered_json::array();
  for (auto t : skip_tasks) skip.push_back(to_string(t));
  j["skip_tasks"] = std::move(skip);
  j["max_in_flight"] = max_in_flight;
  j["max_retries"] = max_retries;
  j["timeout_seconds"] = timeout_seconds;
  j["image_mode"] = image_url_mode ? "url" : "inline";
  j["seed"] = seed;
  j["input"] = input;
  j["manifest"] = manifest;
  j["output"] = output;
  return j;
}

std::shared_ptr<CompletionBackend> make_completion_backend(const RunConfig& config) {
  if (!config.mock_script.empty()) return std::make_shared<MockCompletion>(MockScript::load(config.mock_script));
  if (config.backend_endpoint.empty()) {
    throw Error(ErrorCode::InvalidArgument, "no backend configured: pass --backend-endpoint or --mock-script");
  }
  auto http = HttpConfig::with_env(config.backend_endpoint, config.model);
  http.timeout_seconds = config.timeout_seconds;
  http.image_mode = config.image_url_mode ? ImageMode::Url : ImageMode::Inline;
  RetryPolicy policy;
  policy.max_retries = config.max_retries;
  return std::make_shared<RetryingCompletion>(std::make_shared<HttpCompletion>(std::move(http)), std::move(policy));
}

std::shared_ptr<const TemplateBank> resolve_bank(const RunConfig& config) {
  auto bank = std::make_shared<TemplateBank>(builtin_bank());
  if (!config.bank_path.empty()) bank->merge(load_bank(config.bank_path));
  return bank;
}

ordered_json summarize_records(std::span<const GenerationRecord> records) {
  ordered_json status;
  for (auto s : {RecordStatus::VigOnly, RecordStatus::Corrected, RecordStatus::ParseFailed,
                 RecordStatus::BackendFailed}) {
    status[std::string(to_string(s))] = 0;
  }
  ordered_json termination;
  for (auto t : {Termination::StopSymbol, Termination::EmptyContinuation, Termination::MaxIterations,
                 Termination::RepeatedSentence}) {
    termination[std::string(to_string(t))] = 0;
  }
  for (const auto& r : records) {
    status[std::string(to_string(r.status))] = status[std::string(to_string(r.status))].get<int>() + 1;
    if (r.iqf_trace && r.iqf_trace->termination) {
      auto key = std::string(to_string(*r.iqf_trace->termination));
      termination[key] = termination[key].get<int>() + 1;
    }
  }
  ordered_json j;
  j["records"] = records.size();
  j["status"] = std::move(status);
  j["termination"] = std::move(termination);
  return j;
}

namespace {

std::string run_id_for(const RunConfig& config) {
  char buf[32];
  auto h = derive_seed(config.seed, std::string(to_string(config.task)) + '\x1f' +
                                        fs::path(config.manifest).filename().string());
  std::snprintf(buf, sizeof buf, "run-%016llx", static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace

PipelineResult run_pipeline(const RunConfig& config, CompletionBackend& backend, std::ostream& log,
                            const std::atomic<bool>* cancel) {
  config.validate();
  if (config.manifest.empty()) throw Error(ErrorCode::InvalidArgument, "pipeline needs --manifest");
  if (config.output.empty()) throw Error(ErrorCode::InvalidArgument, "pipeline needs --out");
  const fs::path out_dir = config.output;
  fs::create_directories(out_dir);

  VigConfig vig_cfg;
  vig_cfg.task = config.task;
  vig_cfg.bank = resolve_bank(config);
  vig_cfg.decode = config.gen_decode;
  vig_cfg.seed = config.seed;
  vig_cfg.max_parse_retries = config.max_parse_retries;
  vig_cfg.validate();

  const auto images = load_image_index(config.manifest);
  const auto records_path = out_dir / "records.jsonl";

  std::map<std::pair<std::string, int>, GenerationRecord> existing;
  if (fs::exists(records_path)) {
    for_each_record(records_path, [&](GenerationRecord r) {
      if (r.status == RecordStatus::BackendFailed) return;
      existing.emplace(std::make_pair(r.image.image_id, r.template_id), std::move(r));
    });
  }

  PipelineResult result;
  result.total = images.size();
  std::vector<std::optional<GenerationRecord>> slots(images.size());
  std::vector<std::size_t> pending;
  for (std::size_t i = 0; i < images.size(); ++i) {
    for (int t : planned_template_ids(images[i], vig_cfg)) {
      auto it = existing.find({images[i].image_id, t});
      if (it != existing.end()) {
        slots[i] = it->second;
        ++result.resumed;
        break;
      }
    }
    if (!slots[i]) pending.push_back(i);
  }

  {
    RecordWriter journal(records_path);
    run_indexed(
        pending.size(), config.max_in_flight,
        [&](std::size_t k) {
          const auto idx = pending[k];
          auto record = generate_record(images[idx], vig_cfg, backend);
          if (record.status == RecordStatus::VigOnly && !config.skip_tasks.contains(record.task)) {
            const auto instruction = vic_instruction(record.task);
            record = iqf_correct(std::move(record), instruction, config.iqf, backend);
          }
          slots[idx] = std::move(record);
        },
        [&](std::size_t k) {
          journal.write(*slots[pending[k]]);
          ++result.processed;
        },
        cancel);
  }
  result.cancelled = cancel != nullptr && cancel->load();

  std::vector<GenerationRecord> records;
  for (auto& slot : slots) {
    if (slot) records.push_back(std::move(*slot));
  }
  auto tmp = records_path;
  tmp += ".tmp";
  write_records(records, tmp);
  fs::rename(tmp, records_path);

  std::vector<GenerationRecord> exportable;
  for (const auto& r : records) {
    if (r.status == RecordStatus::VigOnly || r.status == RecordStatus::Corrected) exportable.push_back(r);
  }
  const auto run_id = run_id_for(config);
  auto dataset_manifest = export_llava_format(exportable, out_dir / "llava.json", {run_id});
  write_json_file(dataset_manifest.to_json(), out_dir / "dataset_manifest.json");
  auto summary = summarize_records(records);
  write_json_file(summary, out_dir / "summary.json");
  auto run_manifest = config.to_json();
  run_manifest["run_id"] = run_id;
  run_manifest["command"] = "pipeline";
  write_json_file(run_manifest, out_dir / "run_manifest.json");

  log << "images: " << result.total << ", resumed: " << result.resumed << ", processed: " << result.processed
      << (result.cancelled ? " (cancelled)" : "") << '\n';
  log << "summary: " << summary.dump() << '\n';
  const auto failed = summary["status"]["backend_failed"].get<int>();
  if (failed > 0) log << "warning: " << failed << " record(s) failed at the backend\n";
  return result;
}

int exit_code_for(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::IoError:
    case ErrorCode::Transport:
    case ErrorCode::Timeout:
    case ErrorCode::Protocol:
    case ErrorCode::EmbedderFailure:
      return 1;
    default:
      return 2;
  }
}

}  // namespace vigc
