#include "vigc/vic.hpp"

#include "vigc/error.hpp"
#include "vigc/text.hpp"
#include "vigc/worker_pool.hpp"

namespace vigc {

void IqfConfig::validate() const {
  if (max_iterations < 1) throw Error(ErrorCode::InvalidArgument, "max_iterations must be >= 1");
  decode.validate();
}

InstructionTemplate vic_instruction(TaskType task) {
  switch (task) {
    case TaskType::Conversation:
      return {1, task, "Answer the question based on the image content."};
    case TaskType::DetailDescription:
      return {1, task, "Answer the question based on the image content in detail."};
    case TaskType::ComplexReasoning:
      return {1, task, "Answer the question based on the image content with careful reasoning."};
    case TaskType::KnowledgeVqa:
      return {1, task, "Answer the question based on the image content and common knowledge, briefly."};
  }
  return {1, task, "Answer the question based on the image content."};
}

namespace {

bool already_accepted(const std::vector<std::string>& accepted, const std::string& sentence) {
  for (const auto& s : accepted) {
    if (iequals(s, sentence)) return true;
  }
  return false;
}

}  // namespace

GenerationRecord iqf_correct(GenerationRecord record, const InstructionTemplate& instruction, const IqfConfig& cfg,
                             CompletionBackend& backend) {
  if (record.status != RecordStatus::VigOnly || !record.vig_pair) {
    throw Error(ErrorCode::PreconditionViolated,
                "record " + record.image.image_id + " is " + std::string(to_string(record.status)) + ", not vig_only");
  }
  cfg.validate();

  IqfTrace trace;
  auto& accepted = trace.accepted_sentences;

  for (int k = 0; k < cfg.max_iterations; ++k) {
    BackendRequest request;
    request.image = record.image;
    request.decode = cfg.decode;
    request.stage = Stage::Correction;
    request.task = record.task;
    request.iteration = k;
    request.segments = {{PromptRole::Instruction, instruction.text},
                        {PromptRole::Question, record.vig_pair->question}};
    if (k >= 1) {
      std::string partial = cfg.partial_mode == PartialMode::Cumulative ? join(accepted, " ") : accepted.back();
      request.segments.push_back({PromptRole::PartialAnswer, std::move(partial)});
    }

    BackendResponse response;
    try {
      response = backend.complete(request);
    } catch (const Error& e) {
      if (!is_backend_error(e.code()) && e.code() != ErrorCode::InvalidArgument) throw;
      record.status = RecordStatus::BackendFailed;
      record.iqf_trace = std::move(trace);
      return record;
    }

    if (is_blank(response.text)) {
      trace.termination = Termination::EmptyContinuation;
      break;
    }
    auto sentences = split_sentences(response.text);
    const std::string& head = sentences.front();
    if (cfg.dedup_guard && already_accepted(accepted, head)) {
      trace.termination = Termination::RepeatedSentence;
      break;
    }
    accepted.push_back(head);
    trace.raw_iteration_outputs.push_back(response.text);

    if (response.finish == FinishReason::StopSymbol && sentences.size() <= 1) {
      trace.termination = Termination::StopSymbol;
      break;
    }
    if (k + 1 == cfg.max_iterations) trace.termination = Termination::MaxIterations;
  }

  record.vic_answer = join(accepted, " ");
  record.iqf_trace = std::move(trace);
  record.status = RecordStatus::Corrected;
  return record;
}

std::vector<GenerationRecord> correct_stream(std::vector<GenerationRecord> records, const CorrectOptions& options,
                                             CompletionBackend& backend) {
  options.iqf.validate();
  run_indexed(
      records.size(), options.max_in_flight,
      [&](std::size_t i) {
        auto& r = records[i];
        if (r.status != RecordStatus::VigOnly || options.skip_tasks.contains(r.task)) return;
        const auto instruction = vic_instruction(r.task);
        r = iqf_correct(std::move(r), instruction, options.iqf, backend);
      },
      [&](std::size_t i) {
        if (options.on_record) options.on_record(i, records[i]);
      },
      options.cancel);
  return records;
}

}  // namespace vigc
