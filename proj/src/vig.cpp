#include "vigc/vig.hpp"

#include <algorithm>

#include "vigc/error.hpp"
#include "vigc/text.hpp"
#include "vigc/worker_pool.hpp"

namespace vigc {

namespace {

constexpr std::string_view kQuestionMarker = "Question:";
constexpr std::string_view kAnswerMarker = "Answer:";

std::uint64_t record_seed(const ImageRef& image, std::uint64_t seed) {
  return derive_seed(seed, image.dataset + '\x1f' + image.image_id);
}

}  // namespace

void VigConfig::validate() const {
  if (!bank) throw Error(ErrorCode::InvalidArgument, "VIG config has no template bank");
  if (max_parse_retries < 0) throw Error(ErrorCode::InvalidArgument, "max_parse_retries must be >= 0");
  decode.validate();
}

std::vector<PromptSegment> build_vig_prompt(const InstructionTemplate& tmpl) {
  return {{PromptRole::Instruction, trim(tmpl.text) + std::string(kVigFormatSuffix)}};
}

std::string serialize_qa(const QaPair& pair) { return "Question: " + pair.question + " Answer: " + pair.answer; }

std::optional<QaPair> try_parse_vig_output(std::string_view raw) {
  auto q = ifind(raw, kQuestionMarker);
  if (q != std::string_view::npos) {
    auto q_begin = q + kQuestionMarker.size();
    auto a = ifind(raw, kAnswerMarker, q_begin);
    if (a == std::string_view::npos) return std::nullopt;
    auto a_begin = a + kAnswerMarker.size();
    auto next_q = ifind(raw, kQuestionMarker, a_begin);
    auto question = trim(raw.substr(q_begin, a - q_begin));
    auto answer = trim(raw.substr(a_begin, next_q == std::string_view::npos ? std::string_view::npos : next_q - a_begin));
    if (question.empty() || answer.empty()) return std::nullopt;
    return QaPair{std::move(question), std::move(answer)};
  }
  if (std::count(raw.begin(), raw.end(), '?') != 1) return std::nullopt;
  auto mark = raw.find('?');
  auto question = trim(raw.substr(0, mark + 1));
  auto answer = trim(raw.substr(mark + 1));
  if (question == "?" || answer.empty()) return std::nullopt;
  return QaPair{std::move(question), std::move(answer)};
}

QaPair parse_vig_output(std::string_view raw) {
  if (auto pair = try_parse_vig_output(raw)) return *pair;
  throw Error(ErrorCode::ParseFailed, "no question/answer pair recoverable from output");
}

std::vector<int> planned_template_ids(const ImageRef& image, const VigConfig& cfg) {
  Rng rng(record_seed(image, cfg.seed));
  std::vector<int> ids;
  for (int attempt = 0; attempt <= cfg.max_parse_retries; ++attempt) {
    ids.push_back(select_template(*cfg.bank, cfg.task, rng).id);
  }
  return ids;
}

GenerationRecord generate_record(const ImageRef& image, const VigConfig& cfg, CompletionBackend& backend) {
  GenerationRecord record;
  record.image = image;
  record.task = cfg.task;
  Rng rng(record_seed(image, cfg.seed));

  for (int attempt = 0; attempt <= cfg.max_parse_retries; ++attempt) {
    const auto& tmpl = select_template(*cfg.bank, cfg.task, rng);
    record.template_id = tmpl.id;

    BackendRequest request;
    request.image = image;
    request.segments = build_vig_prompt(tmpl);
    request.decode = cfg.decode;
    request.stage = Stage::Generation;
    request.task = cfg.task;
    request.iteration = attempt;

    try {
      record.raw_vig_output = backend.complete(request).text;
    } catch (const Error& e) {
      if (!is_backend_error(e.code()) && e.code() != ErrorCode::InvalidArgument) throw;
      record.status = RecordStatus::BackendFailed;
      return record;
    }

    if (auto pair = try_parse_vig_output(record.raw_vig_output)) {
      record.vig_pair = std::move(pair);
      record.status = RecordStatus::VigOnly;
      return record;
    }
  }
  record.status = RecordStatus::ParseFailed;
  return record;
}

std::vector<std::optional<GenerationRecord>> generate_batch(std::span<const ImageRef> images, const VigConfig& cfg,
                                                            CompletionBackend& backend, const BatchOptions& options) {
  cfg.validate();
  std::vector<std::optional<GenerationRecord>> out(images.size());
  run_indexed(
      images.size(), options.max_in_flight, [&](std::size_t i) { out[i] = generate_record(images[i], cfg, backend); },
      [&](std::size_t i) {
        if (options.on_record) options.on_record(i, *out[i]);
      },
      options.cancel);
  return out;
}

}  // namespace vigc
