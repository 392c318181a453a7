#pragma once

#include <array>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace vigc {

enum class TaskType { Conversation, DetailDescription, ComplexReasoning, KnowledgeVqa };

inline constexpr std::array<TaskType, 4> kAllTasks = {
    TaskType::Conversation, TaskType::DetailDescription, TaskType::ComplexReasoning, TaskType::KnowledgeVqa};

/// Wire names: "conversation", "detail", "complex", "knowledge_vqa".
std::string_view to_string(TaskType task) noexcept;
/// Throws Error(UnknownTask).
TaskType parse_task(std::string_view name);

struct InstructionTemplate {
  int id = 0;
  TaskType task = TaskType::Conversation;
  std::string text;

  bool operator==(const InstructionTemplate&) const = default;
};

struct ImageRef {
  std::string dataset;
  std::string image_id;
  std::string uri;
  // Raw image bytes for transports that need them inline; never serialized.
  std::shared_ptr<const std::string> media;

  bool operator==(const ImageRef& other) const {
    return dataset == other.dataset && image_id == other.image_id && uri == other.uri;
  }
};

struct QaPair {
  std::string question;
  std::string answer;

  bool operator==(const QaPair&) const = default;
};

/// Trims both fields and enforces non-emptiness. Throws Error(EmptyText).
QaPair make_qa_pair(std::string_view question, std::string_view answer);

enum class Termination { StopSymbol, EmptyContinuation, MaxIterations, RepeatedSentence };

std::string_view to_string(Termination t) noexcept;
Termination parse_termination(std::string_view name);

struct IqfTrace {
  std::vector<std::string> accepted_sentences;
  std::vector<std::string> raw_iteration_outputs;
  // Empty only when the loop was cut short by a backend failure.
  std::optional<Termination> termination;

  bool operator==(const IqfTrace&) const = default;
};

enum class RecordStatus { VigOnly, Corrected, ParseFailed, BackendFailed };

std::string_view to_string(RecordStatus s) noexcept;
RecordStatus parse_status(std::string_view name);

struct GenerationRecord {
  ImageRef image;
  TaskType task = TaskType::Conversation;
  int template_id = 0;
  std::string raw_vig_output;
  std::optional<QaPair> vig_pair;
  std::optional<std::string> vic_answer;
  std::optional<IqfTrace> iqf_trace;
  RecordStatus status = RecordStatus::VigOnly;

  bool operator==(const GenerationRecord&) const = default;

  /// vic_answer for corrected records, otherwise the VIG answer.
  const std::string& final_answer() const;
};

struct SeedRecord {
  ImageRef image;
  TaskType task = TaskType::Conversation;
  QaPair pair;

  bool operator==(const SeedRecord&) const = default;
};

/// Returns a description of the first violated status invariant, or nullopt.
std::optional<std::string> check_record(const GenerationRecord& record);

/// Throws Error(InvalidStatus) naming the offending index.
void validate_records(std::span<const GenerationRecord> records);

}  // namespace vigc
