#pragma once

#include <chrono>
#include <cstdint>
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "vigc/error.hpp"
#include "vigc/types.hpp"

namespace vigc {

enum class PromptRole { Instruction, Question, PartialAnswer };

std::string_view to_string(PromptRole role) noexcept;

struct PromptSegment {
  PromptRole role = PromptRole::Instruction;
  std::string text;

  bool operator==(const PromptSegment&) const = default;
};

struct DecodeParams {
  int max_new_tokens = 512;
  double temperature = 1.0;
  std::vector<std::string> stop_sequences;
  std::optional<std::int64_t> seed;

  /// Throws Error(InvalidArgument).
  void validate() const;

  bool operator==(const DecodeParams&) const = default;
};

enum class Stage { Generation, Correction, Judge };

std::string_view to_string(Stage stage) noexcept;
Stage parse_stage(std::string_view name);

/// One completion call. stage, task and iteration are routing metadata for
/// scripted backends and logs; they are not part of the wire body.
struct BackendRequest {
  std::optional<ImageRef> image;
  std::vector<PromptSegment> segments;
  DecodeParams decode;

  Stage stage = Stage::Generation;
  TaskType task = TaskType::Conversation;
  int iteration = 0;

  const PromptSegment* segment(PromptRole role) const noexcept;
};

/// Throws Error(PreconditionViolated) when the segment layout does not match
/// the stage: instruction always; question iff not generation; partial
/// answer iff a correction iteration >= 1.
void validate_request(const BackendRequest& request);

/// Flat prompt for backends that take a single string: the instruction, then
/// "Question: {q}", then "Answer: {partial}" left open for continuation.
std::string render_prompt(std::span<const PromptSegment> segments);

enum class FinishReason { StopSymbol, LengthLimit, Other };

std::string_view to_wire(FinishReason f) noexcept;
FinishReason parse_finish(std::string_view wire);

struct BackendResponse {
  std::string text;
  FinishReason finish = FinishReason::StopSymbol;

  bool operator==(const BackendResponse&) const = default;
};

class CompletionBackend {
 public:
  virtual ~CompletionBackend() = default;
  /// Throws Error(Transport | Protocol | Timeout).
  virtual BackendResponse complete(const BackendRequest& request) = 0;
};

class EmbeddingBackend {
 public:
  virtual ~EmbeddingBackend() = default;
  /// One L2-normalized vector per input, all of one dimension.
  virtual std::vector<std::vector<double>> embed(std::span<const std::string> texts) = 0;
  virtual std::string name() const = 0;
};

struct Judgment {
  double ref_score = 0.0;
  double cand_score = 0.0;
  std::string rationale;

  bool operator==(const Judgment&) const = default;
};

class JudgeBackend {
 public:
  virtual ~JudgeBackend() = default;
  virtual Judgment judge(const std::string& question, const std::string& reference, const std::string& candidate,
                         const std::string& context) = 0;
};

// ---------------------------------------------------------------------------
// Scripted mock

struct MockRule {
  std::optional<Stage> stage;
  std::optional<TaskType> task;
  std::optional<int> iteration;
  std::optional<std::string> image_id;
  std::string text;
  FinishReason finish = FinishReason::StopSymbol;
  // When set, the rule raises this backend error instead of answering.
  std::optional<ErrorCode> error;

  bool matches(const BackendRequest& request) const noexcept;
};

/// First matching rule wins; unmatched requests get the fallback response.
struct MockScript {
  std::vector<MockRule> rules;
  BackendResponse fallback{"", FinishReason::StopSymbol};

  static MockScript from_json(const nlohmann::json& doc);
  static MockScript load(const std::string& path);
  nlohmann::json to_json() const;
};

class MockCompletion final : public CompletionBackend {
 public:
  explicit MockCompletion(MockScript script) : script_(std::move(script)) {}

  BackendResponse complete(const BackendRequest& request) override;

  std::size_t calls() const;
  std::vector<BackendRequest> requests() const;

 private:
  MockScript script_;
  mutable std::mutex mu_;
  std::vector<BackendRequest> log_;
};

// ---------------------------------------------------------------------------
// HTTP wire protocol

enum class ImageMode { Inline, Url };

struct HttpConfig {
  std::string endpoint;  // e.g. http://host:8000 or http://host:8000/prefix
  std::string model;
  std::string api_key;   // sent as a bearer token when non-empty
  double timeout_seconds = 120.0;
  ImageMode image_mode = ImageMode::Inline;
  std::size_t max_image_bytes = 20u * 1024u * 1024u;

  /// Fills api_key from VIGC_API_KEY when unset.
  static HttpConfig with_env(std::string endpoint, std::string model);
};

/// Builds the POST /v1/complete body.
nlohmann::ordered_json completion_body(const BackendRequest& request, const HttpConfig& config);
/// Parses a 200 response body. Throws Error(Protocol).
BackendResponse parse_completion_body(const std::string& body);

class HttpCompletion final : public CompletionBackend {
 public:
  explicit HttpCompletion(HttpConfig config) : config_(std::move(config)) {}
  BackendResponse complete(const BackendRequest& request) override;

 private:
  HttpConfig config_;
};

class HttpEmbedder final : public EmbeddingBackend {
 public:
  explicit HttpEmbedder(HttpConfig config) : config_(std::move(config)) {}
  std::vector<std::vector<double>> embed(std::span<const std::string> texts) override;
  std::string name() const override { return "http:" + config_.endpoint; }

 private:
  HttpConfig config_;
};

/// Shared POST helper; maps transport failures onto Error codes.
std::string http_post_json(const HttpConfig& config, const std::string& path, const std::string& body);

// ---------------------------------------------------------------------------
// Embedding fallback

inline constexpr std::size_t kHashingDim = 512;

/// Term-frequency vector over lowercased punctuation-free tokens, hashed
/// (FNV-1a) into kHashingDim buckets and L2-normalized. Text with no tokens
/// maps to the first basis vector.
class HashingEmbedder final : public EmbeddingBackend {
 public:
  std::vector<std::vector<double>> embed(std::span<const std::string> texts) override;
  std::string name() const override { return "hashing-tf-512"; }
};

std::size_t hashing_bucket(std::string_view token) noexcept;

// ---------------------------------------------------------------------------
// Judging

/// Parses "S1 S2" on the first line, rationale after it. Throws Error(Protocol).
Judgment parse_judge_reply(const std::string& reply);

extern const char* const kJudgeInstruction;

/// Judge that formats a completion request with the fixed judging instruction.
class CompletionJudge final : public JudgeBackend {
 public:
  explicit CompletionJudge(std::shared_ptr<CompletionBackend> backend, DecodeParams decode = {256, 0.0, {}, {}})
      : backend_(std::move(backend)), decode_(std::move(decode)) {}

  Judgment judge(const std::string& question, const std::string& reference, const std::string& candidate,
                 const std::string& context) override;

 private:
  std::shared_ptr<CompletionBackend> backend_;
  DecodeParams decode_;
};

struct MockJudgeRule {
  std::optional<std::string> question;
  Judgment result;
};

class MockJudge final : public JudgeBackend {
 public:
  MockJudge(std::vector<MockJudgeRule> rules, std::optional<Judgment> fallback)
      : rules_(std::move(rules)), fallback_(std::move(fallback)) {}

  static MockJudge from_json(const nlohmann::json& doc);

  Judgment judge(const std::string& question, const std::string& reference, const std::string& candidate,
                 const std::string& context) override;

 private:
  std::vector<MockJudgeRule> rules_;
  std::optional<Judgment> fallback_;
};

// ---------------------------------------------------------------------------
// Retry

struct RetryPolicy {
  int max_retries = 3;
  std::chrono::milliseconds base_delay{200};
  double multiplier = 2.0;
  std::function<void(std::chrono::milliseconds)> sleep;  // defaults to std::this_thread::sleep_for
};

/// Runs fn, retrying Transport/Timeout errors with exponential backoff.
/// Total attempts never exceed max_retries + 1; other errors propagate at once.
template <typename Fn>
auto with_retries(const RetryPolicy& policy, Fn&& fn) -> decltype(fn());

void backoff_sleep(const RetryPolicy& policy, int attempt);

template <typename Fn>
auto with_retries(const RetryPolicy& policy, Fn&& fn) -> decltype(fn()) {
  for (int attempt = 0;; ++attempt) {
    try {
      return fn();
    } catch (const Error& e) {
      if (!is_retryable(e.code()) || attempt >= policy.max_retries) throw;
      backoff_sleep(policy, attempt);
    }
  }
}

class RetryingCompletion final : public CompletionBackend {
 public:
  RetryingCompletion(std::shared_ptr<CompletionBackend> inner, RetryPolicy policy)
      : inner_(std::move(inner)), policy_(std::move(policy)) {}

  BackendResponse complete(const BackendRequest& request) override {
    return with_retries(policy_, [&] { return inner_->complete(request); });
  }

 private:
  std::shared_ptr<CompletionBackend> inner_;
  RetryPolicy policy_;
};

class RetryingEmbedder final : public EmbeddingBackend {
 public:
  RetryingEmbedder(std::shared_ptr<EmbeddingBackend> inner, RetryPolicy policy)
      : inner_(std::move(inner)), policy_(std::move(policy)) {}

  std::vector<std::vector<double>> embed(std::span<const std::string> texts) override {
    return with_retries(policy_, [&] { return inner_->embed(texts); });
  }
  std::string name() const override { return inner_->name(); }

 private:
  std::shared_ptr<EmbeddingBackend> inner_;
  RetryPolicy policy_;
};

}  // namespace vigc
