#include "vigc/types.hpp"

#include "vigc/error.hpp"
#include "vigc/text.hpp"

namespace vigc {

const char* to_string(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::EmptyText: return "EmptyText";
    case ErrorCode::EmptyBank: return "EmptyBank";
    case ErrorCode::ParseError: return "ParseError";
    case ErrorCode::ParseFailed: return "ParseFailed";
    case ErrorCode::DuplicateId: return "DuplicateId";
    case ErrorCode::UnknownTask: return "UnknownTask";
    case ErrorCode::InvalidStatus: return "InvalidStatus";
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::PreconditionViolated: return "PreconditionViolated";
    case ErrorCode::MissingAnnotation: return "MissingAnnotation";
    case ErrorCode::EmptyLexicon: return "EmptyLexicon";
    case ErrorCode::EmptyCategory: return "EmptyCategory";
    case ErrorCode::EmbedderFailure: return "EmbedderFailure";
    case ErrorCode::IoError: return "IoError";
    case ErrorCode::Transport: return "Transport";
    case ErrorCode::Protocol: return "Protocol";
    case ErrorCode::Timeout: return "Timeout";
  }
  return "Unknown";
}

std::string_view to_string(TaskType task) noexcept {
  switch (task) {
    case TaskType::Conversation: return "conversation";
    case TaskType::DetailDescription: return "detail";
    case TaskType::ComplexReasoning: return "complex";
    case TaskType::KnowledgeVqa: return "knowledge_vqa";
  }
  return "conversation";
}

TaskType parse_task(std::string_view name) {
  for (TaskType t : kAllTasks) {
    if (name == to_string(t)) return t;
  }
  throw Error(ErrorCode::UnknownTask, "unknown task type '" + std::string(name) + "'");
}

std::string_view to_string(Termination t) noexcept {
  switch (t) {
    case Termination::StopSymbol: return "stop_symbol";
    case Termination::EmptyContinuation: return "empty_continuation";
    case Termination::MaxIterations: return "max_iterations";
    case Termination::RepeatedSentence: return "repeated_sentence";
  }
  return "stop_symbol";
}

Termination parse_termination(std::string_view name) {
  for (auto t : {Termination::StopSymbol, Termination::EmptyContinuation, Termination::MaxIterations,
                 Termination::RepeatedSentence}) {
    if (name == to_string(t)) return t;
  }
  throw Error(ErrorCode::ParseError, "unknown termination '" + std::string(name) + "'");
}

std::string_view to_string(RecordStatus s) noexcept {
  switch (s) {
    case RecordStatus::VigOnly: return "vig_only";
    case RecordStatus::Corrected: return "corrected";
    case RecordStatus::ParseFailed: return "parse_failed";
    case RecordStatus::BackendFailed: return "backend_failed";
  }
  return "vig_only";
}

RecordStatus parse_status(std::string_view name) {
  for (auto s : {RecordStatus::VigOnly, RecordStatus::Corrected, RecordStatus::ParseFailed,
                 RecordStatus::BackendFailed}) {
    if (name == to_string(s)) return s;
  }
  throw Error(ErrorCode::ParseError, "unknown status '" + std::string(name) + "'");
}

QaPair make_qa_pair(std::string_view question, std::string_view answer) {
  QaPair pair{trim(question), trim(answer)};
  if (pair.question.empty()) throw Error(ErrorCode::EmptyText, "empty question");
  if (pair.answer.empty()) throw Error(ErrorCode::EmptyText, "empty answer");
  return pair;
}

const std::string& GenerationRecord::final_answer() const {
  if (status == RecordStatus::Corrected && vic_answer && !vic_answer->empty()) return *vic_answer;
  if (!vig_pair) throw Error(ErrorCode::InvalidStatus, "record has no answer");
  return vig_pair->answer;
}

std::optional<std::string> check_record(const GenerationRecord& r) {
  const bool corrected = r.status == RecordStatus::Corrected;
  if (corrected != r.vic_answer.has_value()) return "status=corrected must coincide with vic_answer";
  if (corrected && !r.iqf_trace) return "corrected record lacks iqf trace";
  if (r.iqf_trace && !corrected && r.status != RecordStatus::BackendFailed) {
    return "iqf trace present on a record that was never corrected";
  }
  if (r.status == RecordStatus::ParseFailed && r.vig_pair) return "parse_failed record carries a pair";
  if ((r.status == RecordStatus::VigOnly || corrected) && !r.vig_pair) return "record lacks its vig pair";
  if (r.image.uri.empty()) return "image uri is empty";
  if (r.iqf_trace) {
    const auto& t = *r.iqf_trace;
    if (t.accepted_sentences.size() != t.raw_iteration_outputs.size()) {
      return "iqf trace lists differ in length";
    }
    if (corrected && !t.termination) return "corrected trace lacks termination";
  }
  return std::nullopt;
}

void validate_records(std::span<const GenerationRecord> records) {
  for (std::size_t i = 0; i < records.size(); ++i) {
    if (auto problem = check_record(records[i])) {
      throw Error(ErrorCode::InvalidStatus, "record " + std::to_string(i) + " (" + records[i].image.image_id +
                                                "): " + *problem);
    }
  }
}

}  // namespace vigc
