#pragma once

#include <atomic>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "vigc/backend.hpp"
#include "vigc/templates.hpp"
#include "vigc/types.hpp"

namespace vigc {

inline constexpr std::string_view kVigFormatSuffix = " Respond in the format: Question: <question> Answer: <answer>";

struct VigConfig {
  TaskType task = TaskType::Conversation;
  std::shared_ptr<const TemplateBank> bank;
  DecodeParams decode{512, 1.0, {}, {}};
  std::uint64_t seed = 0;
  int max_parse_retries = 2;

  /// Throws Error(InvalidArgument).
  void validate() const;
};

/// A single instruction segment: the trimmed template text plus the fixed
/// output-format suffix.
std::vector<PromptSegment> build_vig_prompt(const InstructionTemplate& tmpl);

/// "Question: {q} Answer: {a}".
std::string serialize_qa(const QaPair& pair);

/// Primary rule: text between the first case-insensitive "Question:" and the
/// next "Answer:" is the question; the answer runs to the next "Question:"
/// (later pairs are dropped). Fallback when no "Question:" marker exists and
/// the text holds exactly one '?': split just after it.
std::optional<QaPair> try_parse_vig_output(std::string_view raw);

/// Throws Error(ParseFailed).
QaPair parse_vig_output(std::string_view raw);

/// Template ids an image will be offered, in attempt order. Depends only on
/// the run seed and the image identity, never on scheduling.
std::vector<int> planned_template_ids(const ImageRef& image, const VigConfig& cfg);

/// Never throws for backend or parse failures; they land in the record status.
GenerationRecord generate_record(const ImageRef& image, const VigConfig& cfg, CompletionBackend& backend);

struct BatchOptions {
  int max_in_flight = 1;
  const std::atomic<bool>* cancel = nullptr;
  // Invoked serially as each record finishes, in completion order.
  std::function<void(std::size_t index, const GenerationRecord&)> on_record;
};

/// Output is in input order. Entries left unprocessed by a cancel are nullopt.
std::vector<std::optional<GenerationRecord>> generate_batch(std::span<const ImageRef> images, const VigConfig& cfg,
                                                            CompletionBackend& backend, const BatchOptions& options = {});

}  // namespace vigc
