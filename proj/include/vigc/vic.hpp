#pragma once

#include <atomic>
#include <functional>
#include <set>
#include <vector>

#include "vigc/backend.hpp"
#include "vigc/types.hpp"

namespace vigc {

enum class PartialMode {
  Cumulative,    // every accepted sentence so far
  LastSentence,  // only the most recently accepted sentence
};

struct IqfConfig {
  int max_iterations = 12;
  bool dedup_guard = true;
  PartialMode partial_mode = PartialMode::Cumulative;
  DecodeParams decode{512, 0.0, {}, {}};

  void validate() const;
};

/// Fixed answering instruction used on the correction side, one per task.
InstructionTemplate vic_instruction(TaskType task);

/// Iterative correction of one VigOnly record.
///
/// Iteration 0 sends the instruction and the VIG question; every later
/// iteration also sends the accepted answer prefix. Only the first sentence
/// of each response is kept. The loop stops when
///   - the response is blank (EmptyContinuation),
///   - the head repeats an accepted sentence and dedup_guard is on; the
///     repeat is not kept (RepeatedSentence),
///   - the backend reports a stop symbol and the response holds at most one
///     sentence; that sentence is kept first (StopSymbol),
///   - max_iterations responses have been accepted (MaxIterations).
/// The VIG answer does not seed the loop; it stays in raw_vig_output.
///
/// Throws Error(PreconditionViolated) unless record.status is VigOnly. A
/// backend failure yields status BackendFailed with the partial trace.
GenerationRecord iqf_correct(GenerationRecord record, const InstructionTemplate& instruction, const IqfConfig& cfg,
                             CompletionBackend& backend);

struct CorrectOptions {
  IqfConfig iqf;
  std::set<TaskType> skip_tasks;
  int max_in_flight = 1;
  const std::atomic<bool>* cancel = nullptr;
  std::function<void(std::size_t index, const GenerationRecord&)> on_record;
};

/// VigOnly records go through iqf_correct; everything else, and records of
/// skipped task types, pass through untouched. Output order is input order.
/// Records not reached because of a cancel are returned unchanged.
std::vector<GenerationRecord> correct_stream(std::vector<GenerationRecord> records, const CorrectOptions& options,
                                             CompletionBackend& backend);

}  // namespace vigc
