#pragma once

#include <atomic>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <ostream>
#include <set>
#include <string>

#include <nlohmann/json.hpp>

#include "vigc/backend.hpp"
#include "vigc/templates.hpp"
#include "vigc/vic.hpp"

namespace vigc {

/// Fully resolved settings of one CLI run.
struct RunConfig {
  std::string backend_endpoint;
  std::string model = "vigc";
  std::string mock_script;
  std::string bank_path;
  TaskType task = TaskType::Conversation;
  DecodeParams gen_decode{512, 1.0, {}, {}};
  int max_parse_retries = 2;
  IqfConfig iqf;
  std::set<TaskType> skip_tasks;
  int max_in_flight = 4;
  int max_retries = 3;
  double timeout_seconds = 120.0;
  bool image_url_mode = false;
  std::uint64_t seed = 0;
  std::string input;
  std::string manifest;
  std::string output;

  /// Throws Error(InvalidArgument).
  void validate() const;
  /// Secrets are redacted.
  nlohmann::ordered_json to_json() const;
};

/// Mock script when configured, otherwise the HTTP protocol behind retries.
/// Throws Error(InvalidArgument) when neither is configured.
std::shared_ptr<CompletionBackend> make_completion_backend(const RunConfig& config);

/// Built-in bank, extended or overridden by config.bank_path.
std::shared_ptr<const TemplateBank> resolve_bank(const RunConfig& config);

struct PipelineResult {
  std::size_t total = 0;
  std::size_t resumed = 0;
  std::size_t processed = 0;
  bool cancelled = false;
};

/// Generate then correct every manifest image into config.output (a
/// directory): records.jsonl, llava.json, dataset_manifest.json,
/// summary.json and run_manifest.json. Images that already have a completed
/// record for one of their planned (image_id, template_id) keys are reused.
PipelineResult run_pipeline(const RunConfig& config, CompletionBackend& backend, std::ostream& log,
                            const std::atomic<bool>* cancel = nullptr);

/// Per-status counts and the termination histogram.
nlohmann::ordered_json summarize_records(std::span<const GenerationRecord> records);

/// CLI entry point. Exit codes: 0 ok, 1 I/O or transport, 2 schema or config.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

/// Set from a SIGINT handler; running commands stop dispatching new work and
/// flush what they have.
std::atomic<bool>& cli_cancel_flag();

/// Maps a library error onto the CLI exit code.
int exit_code_for(ErrorCode code) noexcept;

}  // namespace vigc
