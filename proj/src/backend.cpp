#include "vigc/backend.hpp"

#include <cmath>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <thread>

#include <httplib.h>

#include "vigc/error.hpp"
#include "vigc/kernels.hpp"
#include "vigc/rng.hpp"
#include "vigc/text.hpp"

namespace vigc {

std::string_view to_string(PromptRole role) noexcept {
  switch (role) {
    case PromptRole::Instruction: return "instruction";
    case PromptRole::Question: return "question";
    case PromptRole::PartialAnswer: return "partial_answer";
  }
  return "instruction";
}

std::string_view to_string(Stage stage) noexcept {
  switch (stage) {
    case Stage::Generation: return "generation";
    case Stage::Correction: return "correction";
    case Stage::Judge: return "judge";
  }
  return "generation";
}

Stage parse_stage(std::string_view name) {
  for (auto s : {Stage::Generation, Stage::Correction, Stage::Judge}) {
    if (name == to_string(s)) return s;
  }
  throw Error(ErrorCode::ParseError, "unknown stage '" + std::string(name) + "'");
}

std::string_view to_wire(FinishReason f) noexcept {
  switch (f) {
    case FinishReason::StopSymbol: return "stop";
    case FinishReason::LengthLimit: return "length";
    case FinishReason::Other: return "other";
  }
  return "other";
}

FinishReason parse_finish(std::string_view wire) {
  if (wire == "stop") return FinishReason::StopSymbol;
  if (wire == "length") return FinishReason::LengthLimit;
  if (wire == "other") return FinishReason::Other;
  throw Error(ErrorCode::Protocol, "unknown finish reason '" + std::string(wire) + "'");
}

void DecodeParams::validate() const {
  if (max_new_tokens < 1) throw Error(ErrorCode::InvalidArgument, "max_new_tokens must be >= 1");
  if (!(temperature >= 0.0)) throw Error(ErrorCode::InvalidArgument, "temperature must be >= 0");
}

const PromptSegment* BackendRequest::segment(PromptRole role) const noexcept {
  for (const auto& s : segments) {
    if (s.role == role) return &s;
  }
  return nullptr;
}

void validate_request(const BackendRequest& request) {
  auto fail = [](const std::string& what) { throw Error(ErrorCode::PreconditionViolated, what); };
  if (request.segment(PromptRole::Instruction) == nullptr) fail("request lacks an instruction segment");
  const bool wants_question = request.stage != Stage::Generation;
  if ((request.segment(PromptRole::Question) != nullptr) != wants_question) {
    fail("question segment must be present exactly for correction and judging");
  }
  const bool wants_partial = request.stage == Stage::Correction && request.iteration >= 1;
  if ((request.segment(PromptRole::PartialAnswer) != nullptr) != wants_partial) {
    fail("partial answer segment must be present exactly from iteration 1 on");
  }
  request.decode.validate();
}

std::string render_prompt(std::span<const PromptSegment> segments) {
  std::string instruction, question, partial;
  bool has_question = false, has_partial = false;
  for (const auto& s : segments) {
    switch (s.role) {
      case PromptRole::Instruction: instruction = s.text; break;
      case PromptRole::Question: question = s.text; has_question = true; break;
      case PromptRole::PartialAnswer: partial = s.text; has_partial = true; break;
    }
  }
  std::string out = instruction;
  if (has_question) out += "\nQuestion: " + question + "\nAnswer:";
  if (has_partial) out += " " + partial;
  return out;
}

// ---------------------------------------------------------------------------
// Mock

bool MockRule::matches(const BackendRequest& request) const noexcept {
  if (stage && *stage != request.stage) return false;
  if (task && *task != request.task) return false;
  if (iteration && *iteration != request.iteration) return false;
  if (image_id) {
    if (!request.image || request.image->image_id != *image_id) return false;
  }
  return true;
}

namespace {

ErrorCode parse_error_kind(std::string_view name) {
  if (name == "transport") return ErrorCode::Transport;
  if (name == "protocol") return ErrorCode::Protocol;
  if (name == "timeout") return ErrorCode::Timeout;
  throw Error(ErrorCode::ParseError, "unknown mock error kind '" + std::string(name) + "'");
}

std::string error_kind_name(ErrorCode code) {
  switch (code) {
    case ErrorCode::Protocol: return "protocol";
    case ErrorCode::Timeout: return "timeout";
    default: return "transport";
  }
}

}  // namespace

MockScript MockScript::from_json(const nlohmann::json& doc) {
  MockScript script;
  try {
    for (const auto& r : doc.value("rules", nlohmann::json::array())) {
      MockRule rule;
      if (r.contains("stage")) rule.stage = parse_stage(r["stage"].get<std::string>());
      if (r.contains("task")) rule.task = parse_task(r["task"].get<std::string>());
      if (r.contains("iteration")) rule.iteration = r["iteration"].get<int>();
      if (r.contains("image_id")) rule.image_id = r["image_id"].get<std::string>();
      rule.text = r.value("text", "");
      if (r.contains("finish")) rule.finish = parse_finish(r["finish"].get<std::string>());
      if (r.contains("error")) rule.error = parse_error_kind(r["error"].get<std::string>());
      script.rules.push_back(std::move(rule));
    }
    if (doc.contains("default")) {
      const auto& d = doc["default"];
      script.fallback.text = d.value("text", "");
      if (d.contains("finish")) script.fallback.finish = parse_finish(d["finish"].get<std::string>());
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::ParseError, std::string("mock script: ") + e.what());
  } catch (const Error& e) {
    throw Error(ErrorCode::ParseError, std::string("mock script: ") + e.what());
  }
  return script;
}

MockScript MockScript::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::IoError, "cannot open mock script " + path);
  try {
    return from_json(nlohmann::json::parse(in));
  } catch (const nlohmann::json::parse_error& e) {
    throw Error(ErrorCode::ParseError, path + " at byte " + std::to_string(e.byte));
  }
}

nlohmann::json MockScript::to_json() const {
  nlohmann::json rules_doc = nlohmann::json::array();
  for (const auto& r : rules) {
    nlohmann::json j;
    if (r.stage) j["stage"] = to_string(*r.stage);
    if (r.task) j["task"] = to_string(*r.task);
    if (r.iteration) j["iteration"] = *r.iteration;
    if (r.image_id) j["image_id"] = *r.image_id;
    j["text"] = r.text;
    j["finish"] = to_wire(r.finish);
    if (r.error) j["error"] = error_kind_name(*r.error);
    rules_doc.push_back(std::move(j));
  }
  return {{"rules", rules_doc}, {"default", {{"text", fallback.text}, {"finish", to_wire(fallback.finish)}}}};
}

BackendResponse MockCompletion::complete(const BackendRequest& request) {
  {
    std::lock_guard lock(mu_);
    log_.push_back(request);
  }
  for (const auto& rule : script_.rules) {
    if (!rule.matches(request)) continue;
    if (rule.error) throw Error(*rule.error, "scripted failure");
    return {trim_right(rule.text), rule.finish};
  }
  return {trim_right(script_.fallback.text), script_.fallback.finish};
}

std::size_t MockCompletion::calls() const {
  std::lock_guard lock(mu_);
  return log_.size();
}

std::vector<BackendRequest> MockCompletion::requests() const {
  std::lock_guard lock(mu_);
  return log_;
}

// ---------------------------------------------------------------------------
// HTTP

HttpConfig HttpConfig::with_env(std::string endpoint, std::string model) {
  HttpConfig c;
  c.endpoint = std::move(endpoint);
  c.model = std::move(model);
  if (const char* key = std::getenv("VIGC_API_KEY")) c.api_key = key;
  return c;
}

namespace {

struct SplitUrl {
  std::string base;    // scheme://host[:port]
  std::string prefix;  // "" or "/path" without trailing slash
};

SplitUrl split_endpoint(const std::string& endpoint) {
  auto scheme_end = endpoint.find("://");
  std::size_t host_start = scheme_end == std::string::npos ? 0 : scheme_end + 3;
  auto slash = endpoint.find('/', host_start);
  SplitUrl out;
  if (slash == std::string::npos) {
    out.base = endpoint;
  } else {
    out.base = endpoint.substr(0, slash);
    out.prefix = endpoint.substr(slash);
    while (!out.prefix.empty() && out.prefix.back() == '/') out.prefix.pop_back();
  }
  return out;
}

std::string read_image_bytes(const ImageRef& image, const HttpConfig& config) {
  std::string bytes;
  if (image.media) {
    bytes = *image.media;
  } else {
    std::ifstream in(image.uri, std::ios::binary);
    if (!in) throw Error(ErrorCode::InvalidArgument, "cannot read image " + image.uri + " for inline transfer");
    std::ostringstream ss;
    ss << in.rdbuf();
    bytes = ss.str();
  }
  if (bytes.size() > config.max_image_bytes) {
    throw Error(ErrorCode::InvalidArgument, "image " + image.image_id + " exceeds the inline size cap");
  }
  return bytes;
}

}  // namespace

nlohmann::ordered_json completion_body(const BackendRequest& request, const HttpConfig& config) {
  nlohmann::ordered_json body;
  body["model"] = config.model;
  body["image_b64"] = nullptr;
  if (request.image) {
    if (config.image_mode == ImageMode::Inline) {
      body["image_b64"] = httplib::detail::base64_encode(read_image_bytes(*request.image, config));
    }
  }
  auto segments = nlohmann::ordered_json::array();
  for (const auto& s : request.segments) {
    nlohmann::ordered_json seg;
    seg["role"] = to_string(s.role);
    seg["text"] = s.text;
    segments.push_back(std::move(seg));
  }
  body["segments"] = std::move(segments);
  body["max_new_tokens"] = request.decode.max_new_tokens;
  body["temperature"] = request.decode.temperature;
  body["stop"] = request.decode.stop_sequences;
  if (request.decode.seed) {
    body["seed"] = *request.decode.seed;
  } else {
    body["seed"] = nullptr;
  }
  if (request.image && config.image_mode == ImageMode::Url) body["image_url"] = request.image->uri;
  return body;
}

BackendResponse parse_completion_body(const std::string& body) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(body);
  } catch (const nlohmann::json::parse_error&) {
    throw Error(ErrorCode::Protocol, "completion response is not JSON");
  }
  if (!doc.is_object() || !doc.contains("text") || !doc["text"].is_string() || !doc.contains("finish") ||
      !doc["finish"].is_string()) {
    throw Error(ErrorCode::Protocol, "completion response needs string fields text and finish");
  }
  return {trim_right(doc["text"].get<std::string>()), parse_finish(doc["finish"].get<std::string>())};
}

std::string http_post_json(const HttpConfig& config, const std::string& path, const std::string& body) {
  auto url = split_endpoint(config.endpoint);
  httplib::Client client(url.base);
  if (!client.is_valid()) throw Error(ErrorCode::InvalidArgument, "invalid endpoint " + config.endpoint);
  auto secs = static_cast<time_t>(config.timeout_seconds);
  auto usecs = static_cast<time_t>((config.timeout_seconds - static_cast<double>(secs)) * 1e6);
  client.set_connection_timeout(secs, usecs);
  client.set_read_timeout(secs, usecs);
  client.set_write_timeout(secs, usecs);
  httplib::Headers headers;
  if (!config.api_key.empty()) headers.emplace("Authorization", "Bearer " + config.api_key);

  auto result = client.Post(url.prefix + path, headers, body, "application/json");
  if (!result) {
    auto err = result.error();
    std::string what = "POST " + config.endpoint + path + ": " + httplib::to_string(err);
    if (err == httplib::Error::ConnectionTimeout || err == httplib::Error::Read) {
      throw Error(ErrorCode::Timeout, what);
    }
    throw Error(ErrorCode::Transport, what);
  }
  if (result->status != 200) {
    std::string message = result->body;
    try {
      auto doc = nlohmann::json::parse(result->body);
      if (doc.is_object() && doc.contains("error") && doc["error"].is_string()) message = doc["error"];
    } catch (const nlohmann::json::exception&) {
    }
    std::string what = "HTTP " + std::to_string(result->status) + " from " + config.endpoint + path + ": " + message;
    if (result->status >= 500 || result->status == 429 || result->status == 408) {
      throw Error(ErrorCode::Transport, what);
    }
    throw Error(ErrorCode::Protocol, what);
  }
  return result->body;
}

BackendResponse HttpCompletion::complete(const BackendRequest& request) {
  auto body = completion_body(request, config_).dump();
  return parse_completion_body(http_post_json(config_, "/v1/complete", body));
}

std::vector<std::vector<double>> HttpEmbedder::embed(std::span<const std::string> texts) {
  nlohmann::json req = {{"texts", std::vector<std::string>(texts.begin(), texts.end())}};
  auto body = http_post_json(config_, "/v1/embed", req.dump());
  std::vector<std::vector<double>> vectors;
  try {
    auto doc = nlohmann::json::parse(body);
    vectors = doc.at("vectors").get<std::vector<std::vector<double>>>();
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::Protocol, std::string("embed response: ") + e.what());
  }
  if (vectors.size() != texts.size()) throw Error(ErrorCode::Protocol, "embed response has the wrong vector count");
  for (auto& v : vectors) {
    if (v.empty() || v.size() != vectors.front().size()) {
      throw Error(ErrorCode::Protocol, "embed response vectors differ in dimension");
    }
    double norm = 0.0;
    for (double x : v) norm += x * x;
    norm = std::sqrt(norm);
    if (norm == 0.0 || !std::isfinite(norm)) throw Error(ErrorCode::Protocol, "embed response has a zero vector");
    for (double& x : v) x /= norm;
  }
  return vectors;
}

// ---------------------------------------------------------------------------
// Hashing embedder

std::size_t hashing_bucket(std::string_view token) noexcept { return fnv1a64(token) % kHashingDim; }

std::vector<std::vector<double>> HashingEmbedder::embed(std::span<const std::string> texts) {
  auto matrix = kernels::hashing_embed_omp(texts, kHashingDim);
  std::vector<std::vector<double>> out(matrix.rows);
  for (std::size_t i = 0; i < matrix.rows; ++i) {
    auto row = matrix.row(i);
    out[i].assign(row.begin(), row.end());
  }
  return out;
}

// ---------------------------------------------------------------------------
// Judging

const char* const kJudgeInstruction =
    "You are a helpful and precise assistant for checking the quality of the answer. Rate the helpfulness, "
    "relevance, accuracy, and level of detail of the two responses to the question, given the context. Each "
    "assistant receives an overall score on a scale of 1 to 10, where a higher score indicates better overall "
    "performance. Output a first line containing only two values, the scores for Assistant 1 and Assistant 2, "
    "separated by a space. On the following lines, explain your evaluation.";

Judgment parse_judge_reply(const std::string& reply) {
  auto newline = reply.find('\n');
  std::string first = trim(reply.substr(0, newline));
  std::string rest = newline == std::string::npos ? std::string() : trim(reply.substr(newline + 1));

  std::istringstream in(first);
  double a = 0.0, b = 0.0;
  std::string extra;
  if (!(in >> a >> b) || (in >> extra)) {
    throw Error(ErrorCode::Protocol, "judge reply first line is not two scores: '" + first + "'");
  }
  auto in_range = [](double s) { return std::isfinite(s) && s >= 1.0 && s <= 10.0; };
  if (!in_range(a) || !in_range(b)) throw Error(ErrorCode::Protocol, "judge scores outside [1,10]: " + first);
  return {a, b, rest};
}

Judgment CompletionJudge::judge(const std::string& question, const std::string& reference,
                                const std::string& candidate, const std::string& context) {
  BackendRequest request;
  request.stage = Stage::Judge;
  request.decode = decode_;
  std::string body = "[Context]\n" + context + "\n\n[Question]\n" + question + "\n\n[Assistant 1]\n" + reference +
                     "\n[End of Assistant 1]\n\n[Assistant 2]\n" + candidate + "\n[End of Assistant 2]";
  request.segments = {{PromptRole::Instruction, kJudgeInstruction}, {PromptRole::Question, body}};
  return parse_judge_reply(backend_->complete(request).text);
}

MockJudge MockJudge::from_json(const nlohmann::json& doc) {
  auto parse_judgment = [](const nlohmann::json& j) {
    return Judgment{j.at("ref").get<double>(), j.at("cand").get<double>(), j.value("rationale", "")};
  };
  std::vector<MockJudgeRule> rules;
  std::optional<Judgment> fallback;
  try {
    for (const auto& r : doc.value("rules", nlohmann::json::array())) {
      MockJudgeRule rule;
      if (r.contains("question")) rule.question = r["question"].get<std::string>();
      rule.result = parse_judgment(r);
      rules.push_back(std::move(rule));
    }
    if (doc.contains("default")) fallback = parse_judgment(doc["default"]);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::ParseError, std::string("mock judge script: ") + e.what());
  }
  return MockJudge(std::move(rules), std::move(fallback));
}

Judgment MockJudge::judge(const std::string& question, const std::string&, const std::string&, const std::string&) {
  for (const auto& r : rules_) {
    if (!r.question || *r.question == question) return r.result;
  }
  if (fallback_) return *fallback_;
  throw Error(ErrorCode::Protocol, "mock judge has no score for question '" + question + "'");
}

// ---------------------------------------------------------------------------

void backoff_sleep(const RetryPolicy& policy, int attempt) {
  double factor = std::pow(policy.multiplier, attempt);
  auto delay = std::chrono::milliseconds(static_cast<long long>(static_cast<double>(policy.base_delay.count()) * factor));
  if (policy.sleep) {
    policy.sleep(delay);
  } else {
    std::this_thread::sleep_for(delay);
  }
}

}  // namespace vigc
