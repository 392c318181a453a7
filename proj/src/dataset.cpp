#include "vigc/dataset.hpp"

#include <iomanip>
#include <sstream>

#include <openssl/evp.h>

#include "vigc/error.hpp"
#include "vigc/text.hpp"
#include "vigc/vig.hpp"

namespace vigc {

namespace fs = std::filesystem;
using json = nlohmann::json;
using ordered_json = nlohmann::ordered_json;

namespace {

std::ofstream open_for_write(const fs::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::IoError, "cannot write " + path.string());
  return out;
}

std::ifstream open_for_read(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoError, "cannot open " + path.string());
  return in;
}

ordered_json image_to_json(const ImageRef& image) {
  ordered_json j;
  j["dataset"] = image.dataset;
  j["image_id"] = image.image_id;
  j["uri"] = image.uri;
  return j;
}

ImageRef image_from_json(const json& j) {
  ImageRef image;
  image.dataset = j.at("dataset").get<std::string>();
  image.image_id = j.at("image_id").get<std::string>();
  image.uri = j.at("uri").get<std::string>();
  if (image.uri.empty()) throw Error(ErrorCode::ParseError, "image " + image.image_id + " has an empty uri");
  return image;
}

template <typename T>
ordered_json nullable(const std::optional<T>& value) {
  return value ? ordered_json(*value) : ordered_json(nullptr);
}

std::string id_string(const json& j) {
  if (j.is_string()) return j.get<std::string>();
  if (j.is_number_integer()) return std::to_string(j.get<long long>());
  throw Error(ErrorCode::ParseError, "id must be a string or integer");
}

// Calls fn(line_number, parsed) for each non-blank line.
void for_each_json_line(const fs::path& path, const std::function<void(std::size_t, const json&)>& fn) {
  auto in = open_for_read(path);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (is_blank(line)) continue;
    json doc;
    try {
      doc = json::parse(line);
    } catch (const json::parse_error& e) {
      throw Error(ErrorCode::ParseError,
                  path.string() + " line " + std::to_string(line_no) + " at column " + std::to_string(e.byte));
    }
    try {
      fn(line_no, doc);
    } catch (const json::exception& e) {
      throw Error(ErrorCode::ParseError, path.string() + " line " + std::to_string(line_no) + ": " + e.what());
    } catch (const Error& e) {
      if (e.code() == ErrorCode::UnknownTask) throw;
      throw Error(ErrorCode::ParseError, path.string() + " line " + std::to_string(line_no) + ": " + e.what());
    }
  }
}

std::string strip_image_token(std::string_view value) {
  std::string s(value);
  constexpr std::string_view token = "<image>";
  for (auto pos = s.find(token); pos != std::string::npos; pos = s.find(token)) s.erase(pos, token.size());
  return trim(s);
}

std::string hex(const unsigned char* bytes, std::size_t n) {
  std::ostringstream ss;
  ss << std::hex << std::setfill('0');
  for (std::size_t i = 0; i < n; ++i) ss << std::setw(2) << static_cast<int>(bytes[i]);
  return ss.str();
}

}  // namespace

// ---------------------------------------------------------------------------

ordered_json record_to_json(const GenerationRecord& r) {
  ordered_json j;
  j["image"] = image_to_json(r.image);
  j["task"] = to_string(r.task);
  j["template_id"] = r.template_id;
  j["raw_vig_output"] = r.raw_vig_output;
  j["question"] = r.vig_pair ? ordered_json(r.vig_pair->question) : ordered_json(nullptr);
  j["vig_answer"] = r.vig_pair ? ordered_json(r.vig_pair->answer) : ordered_json(nullptr);
  j["vic_answer"] = nullable(r.vic_answer);
  if (r.iqf_trace) {
    ordered_json iqf;
    iqf["accepted"] = r.iqf_trace->accepted_sentences;
    iqf["raw"] = r.iqf_trace->raw_iteration_outputs;
    iqf["termination"] =
        r.iqf_trace->termination ? ordered_json(to_string(*r.iqf_trace->termination)) : ordered_json(nullptr);
    j["iqf"] = std::move(iqf);
  } else {
    j["iqf"] = nullptr;
  }
  j["status"] = to_string(r.status);
  return j;
}

GenerationRecord record_from_json(const json& j) {
  static constexpr const char* kFields[] = {"image",      "task",       "template_id", "raw_vig_output", "question",
                                            "vig_answer", "vic_answer", "iqf",         "status"};
  if (!j.is_object()) throw Error(ErrorCode::ParseError, "record is not a JSON object");
  for (const char* f : kFields) {
    if (!j.contains(f)) throw Error(ErrorCode::ParseError, std::string("record lacks \"") + f + "\"");
  }
  GenerationRecord r;
  try {
    r.image = image_from_json(j["image"]);
    r.task = parse_task(j["task"].get<std::string>());
    r.template_id = j["template_id"].get<int>();
    r.raw_vig_output = j["raw_vig_output"].get<std::string>();
    const bool has_q = !j["question"].is_null();
    const bool has_a = !j["vig_answer"].is_null();
    if (has_q != has_a) throw Error(ErrorCode::ParseError, "question and vig_answer must both be null or set");
    if (has_q) r.vig_pair = QaPair{j["question"].get<std::string>(), j["vig_answer"].get<std::string>()};
    if (!j["vic_answer"].is_null()) r.vic_answer = j["vic_answer"].get<std::string>();
    if (!j["iqf"].is_null()) {
      const auto& iqf = j["iqf"];
      IqfTrace t;
      t.accepted_sentences = iqf.at("accepted").get<std::vector<std::string>>();
      t.raw_iteration_outputs = iqf.at("raw").get<std::vector<std::string>>();
      if (!iqf.at("termination").is_null()) t.termination = parse_termination(iqf["termination"].get<std::string>());
      r.iqf_trace = std::move(t);
    }
    r.status = parse_status(j["status"].get<std::string>());
  } catch (const json::exception& e) {
    throw Error(ErrorCode::ParseError, e.what());
  } catch (const Error& e) {
    if (e.code() == ErrorCode::ParseError) throw;
    throw Error(ErrorCode::ParseError, e.what());
  }
  if (auto problem = check_record(r)) throw Error(ErrorCode::ParseError, *problem);
  return r;
}

void for_each_record(const fs::path& path, const std::function<void(GenerationRecord)>& fn) {
  for_each_json_line(path, [&](std::size_t, const json& doc) { fn(record_from_json(doc)); });
}

std::vector<GenerationRecord> read_records(const fs::path& path) {
  std::vector<GenerationRecord> out;
  for_each_record(path, [&](GenerationRecord r) { out.push_back(std::move(r)); });
  return out;
}

void write_records(std::span<const GenerationRecord> records, const fs::path& path) {
  auto out = open_for_write(path);
  for (const auto& r : records) out << record_to_json(r).dump() << '\n';
  if (!out) throw Error(ErrorCode::IoError, "write failed for " + path.string());
}

RecordWriter::RecordWriter(const fs::path& path, bool truncate)
    : out_(path, std::ios::binary | (truncate ? std::ios::trunc : std::ios::app)) {
  if (!out_) throw Error(ErrorCode::IoError, "cannot open " + path.string() + " for append");
}

void RecordWriter::write(const GenerationRecord& record) {
  auto line = record_to_json(record).dump();
  std::lock_guard lock(mu_);
  out_ << line << '\n';
  out_.flush();
}

void RecordWriter::flush() {
  std::lock_guard lock(mu_);
  out_.flush();
}

// ---------------------------------------------------------------------------

SeedFormat parse_seed_format(std::string_view name) {
  if (name == "llava_json") return SeedFormat::LlavaJson;
  if (name == "qa_jsonl") return SeedFormat::QaJsonl;
  throw Error(ErrorCode::InvalidArgument, "unknown seed format '" + std::string(name) + "'");
}

namespace {

TaskType entry_task(const json& entry, const SeedLoadOptions& options) {
  if (entry.contains("task")) return parse_task(entry["task"].get<std::string>());
  if (options.task) return *options.task;
  throw Error(ErrorCode::UnknownTask, "entry has no \"task\" field and no default task was given");
}

SeedLoadResult load_llava(const fs::path& path, const SeedLoadOptions& options) {
  auto in = open_for_read(path);
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::parse_error& e) {
    throw Error(ErrorCode::ParseError, path.string() + " at byte offset " + std::to_string(e.byte));
  }
  if (!doc.is_array()) throw Error(ErrorCode::ParseError, path.string() + ": top level must be an array");

  SeedLoadResult result;
  for (std::size_t idx = 0; idx < doc.size(); ++idx) {
    const auto& entry = doc[idx];
    auto where = [&] { return path.string() + " entry " + std::to_string(idx); };
    try {
      TaskType task = entry_task(entry, options);
      ImageRef image;
      image.dataset = options.dataset;
      image.uri = entry.at("image").get<std::string>();
      image.image_id = entry.contains("id") ? id_string(entry["id"]) : fs::path(image.uri).stem().string();
      const auto& turns = entry.at("conversations");
      if (!turns.is_array() || turns.size() % 2 != 0) {
        throw Error(ErrorCode::ParseError, "conversations must hold human/gpt pairs");
      }
      for (std::size_t t = 0; t < turns.size(); t += 2) {
        if (turns[t].at("from") != "human" || turns[t + 1].at("from") != "gpt") {
          throw Error(ErrorCode::ParseError, "turn " + std::to_string(t) + " is not a human/gpt pair");
        }
        auto pair = make_qa_pair(strip_image_token(turns[t].at("value").get<std::string>()),
                                 turns[t + 1].at("value").get<std::string>());
        result.records.push_back({image, task, std::move(pair)});
        ++result.records_per_task[task];
      }
      ++result.samples_per_task[task];
    } catch (const json::exception& e) {
      throw Error(ErrorCode::ParseError, where() + ": " + e.what());
    } catch (const Error& e) {
      if (e.code() == ErrorCode::UnknownTask) throw Error(ErrorCode::UnknownTask, where() + ": " + e.what());
      throw Error(ErrorCode::ParseError, where() + ": " + e.what());
    }
  }
  return result;
}

SeedLoadResult load_qa_jsonl(const fs::path& path, const SeedLoadOptions& options) {
  SeedLoadResult result;
  for_each_json_line(path, [&](std::size_t, const json& doc) {
    TaskType task = entry_task(doc, options);
    auto pair = make_qa_pair(doc.at("question").get<std::string>(), doc.at("answer").get<std::string>());
    result.records.push_back({image_from_json(doc.at("image")), task, std::move(pair)});
    ++result.records_per_task[task];
    ++result.samples_per_task[task];
  });
  return result;
}

}  // namespace

SeedLoadResult load_seed_dataset(const fs::path& path, SeedFormat format, const SeedLoadOptions& options) {
  return format == SeedFormat::LlavaJson ? load_llava(path, options) : load_qa_jsonl(path, options);
}

void write_seed_jsonl(std::span<const SeedRecord> seeds, const fs::path& path) {
  auto out = open_for_write(path);
  for (const auto& s : seeds) {
    ordered_json j;
    j["image"] = image_to_json(s.image);
    j["task"] = to_string(s.task);
    j["question"] = s.pair.question;
    j["answer"] = s.pair.answer;
    out << j.dump() << '\n';
  }
}

// ---------------------------------------------------------------------------

std::vector<VigTrainingSample> build_vig_training_set(std::span<const SeedRecord> seeds, const TemplateBank& bank,
                                                      std::uint64_t rng_seed) {
  Rng rng(rng_seed);
  std::vector<VigTrainingSample> out;
  out.reserve(seeds.size());
  for (const auto& s : seeds) {
    const auto& tmpl = select_template(bank, s.task, rng);
    out.push_back({s.image, s.task, tmpl.id, tmpl.text, serialize_qa(s.pair)});
  }
  return out;
}

std::vector<VicTrainingSample> build_vic_training_set(std::span<const SeedRecord> seeds) {
  std::vector<VicTrainingSample> out;
  out.reserve(seeds.size());
  for (const auto& s : seeds) out.push_back({s.image, s.task, s.pair.question, s.pair.answer});
  return out;
}

void write_vig_training_set(std::span<const VigTrainingSample> samples, const fs::path& path) {
  auto out = open_for_write(path);
  for (const auto& s : samples) {
    ordered_json j;
    j["image"] = image_to_json(s.image);
    j["task"] = to_string(s.task);
    j["template_id"] = s.template_id;
    j["instruction"] = s.instruction;
    j["target"] = s.target;
    out << j.dump() << '\n';
  }
}

void write_vic_training_set(std::span<const VicTrainingSample> samples, const fs::path& path) {
  auto out = open_for_write(path);
  for (const auto& s : samples) {
    ordered_json j;
    j["image"] = image_to_json(s.image);
    j["task"] = to_string(s.task);
    j["question"] = s.question;
    j["answer"] = s.answer;
    out << j.dump() << '\n';
  }
}

// ---------------------------------------------------------------------------

std::vector<ImageRef> load_image_index(const fs::path& path) {
  std::vector<ImageRef> images;
  std::set<std::pair<std::string, std::string>> seen;
  for_each_json_line(path, [&](std::size_t, const json& doc) {
    auto image = image_from_json(doc);
    if (seen.emplace(image.dataset, image.image_id).second) images.push_back(std::move(image));
  });
  return images;
}

void write_image_index(std::span<const ImageRef> images, const fs::path& path) {
  auto out = open_for_write(path);
  for (const auto& image : images) out << image_to_json(image).dump() << '\n';
}

std::set<std::string> load_id_set(const fs::path& path) {
  std::set<std::string> ids;
  const auto ext = path.extension().string();
  if (ext == ".jsonl") {
    for_each_json_line(path, [&](std::size_t, const json& doc) { ids.insert(doc.at("image_id").get<std::string>()); });
    return ids;
  }
  if (ext == ".json") {
    auto in = open_for_read(path);
    json doc;
    try {
      doc = json::parse(in);
    } catch (const json::parse_error& e) {
      throw Error(ErrorCode::ParseError, path.string() + " at byte offset " + std::to_string(e.byte));
    }
    if (!doc.is_array()) throw Error(ErrorCode::ParseError, path.string() + ": expected a LLaVA JSON array");
    for (const auto& entry : doc) {
      if (entry.contains("image") && entry["image"].is_string()) {
        ids.insert(fs::path(entry["image"].get<std::string>()).stem().string());
      } else if (entry.contains("id")) {
        ids.insert(id_string(entry["id"]));
      }
    }
    return ids;
  }
  auto in = open_for_read(path);
  std::string line;
  while (std::getline(in, line)) {
    auto id = trim(line);
    if (id.empty() || id.front() == '#') continue;
    ids.insert(std::move(id));
  }
  return ids;
}

ImageManifest build_image_manifest(std::span<const ImageRef> index, const std::set<std::string>& exclusion,
                                   const std::set<std::string>& already_used, std::string provenance) {
  ImageManifest manifest;
  manifest.provenance = std::move(provenance);
  std::set<std::pair<std::string, std::string>> seen;
  for (const auto& image : index) {
    if (!seen.emplace(image.dataset, image.image_id).second) continue;
    if (exclusion.contains(image.image_id) || already_used.contains(image.image_id)) {
      ++manifest.excluded_count;
      continue;
    }
    manifest.images.push_back(image);
  }
  for (const auto& image : manifest.images) {
    if (exclusion.contains(image.image_id) || already_used.contains(image.image_id)) {
      throw Error(ErrorCode::PreconditionViolated, "manifest still contains excluded image " + image.image_id);
    }
  }
  return manifest;
}

// ---------------------------------------------------------------------------

std::vector<GenerationRecord> dedup_records(std::span<const GenerationRecord> records) {
  std::set<std::pair<std::string, std::string>> seen;
  std::vector<GenerationRecord> out;
  for (const auto& r : records) {
    if (!r.vig_pair) {
      out.push_back(r);
      continue;
    }
    if (seen.emplace(r.image.image_id, normalize_for_matching(r.vig_pair->question)).second) out.push_back(r);
  }
  return out;
}

ordered_json DatasetManifest::to_json() const {
  ordered_json j;
  j["file"] = file;
  j["record_count"] = record_count;
  ordered_json c = ordered_json::object();
  for (const auto& [task, n] : counts) c[std::string(to_string(task))] = n;
  j["counts"] = std::move(c);
  j["source_run_ids"] = source_run_ids;
  j["tool_version"] = tool_version;
  j["sha256"] = sha256;
  return j;
}

std::string file_sha256(const fs::path& path) {
  auto in = open_for_read(path);
  std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)> ctx(EVP_MD_CTX_new(), EVP_MD_CTX_free);
  if (!ctx || EVP_DigestInit_ex(ctx.get(), EVP_sha256(), nullptr) != 1) {
    throw Error(ErrorCode::IoError, "sha256 unavailable");
  }
  std::vector<char> buf(1 << 16);
  while (in) {
    in.read(buf.data(), static_cast<std::streamsize>(buf.size()));
    if (in.gcount() > 0) EVP_DigestUpdate(ctx.get(), buf.data(), static_cast<std::size_t>(in.gcount()));
  }
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  EVP_DigestFinal_ex(ctx.get(), digest, &len);
  return hex(digest, len);
}

DatasetManifest export_llava_format(std::span<const GenerationRecord> records, const fs::path& out_path,
                                    std::vector<std::string> source_run_ids) {
  DatasetManifest manifest;
  auto doc = ordered_json::array();
  for (const auto& r : records) {
    if (r.status != RecordStatus::VigOnly && r.status != RecordStatus::Corrected) {
      throw Error(ErrorCode::InvalidStatus, "cannot export " + std::string(to_string(r.status)) + " record for image " +
                                                r.image.image_id);
    }
    ordered_json human;
    human["from"] = "human";
    human["value"] = "<image>\n" + r.vig_pair->question;
    ordered_json gpt;
    gpt["from"] = "gpt";
    gpt["value"] = r.final_answer();
    ordered_json entry;
    entry["id"] = r.image.image_id;
    entry["image"] = r.image.uri;
    entry["conversations"] = ordered_json::array({std::move(human), std::move(gpt)});
    doc.push_back(std::move(entry));
    ++manifest.counts[r.task];
  }
  write_json_file(doc, out_path);
  manifest.file = out_path.filename().string();
  manifest.record_count = records.size();
  manifest.source_run_ids = std::move(source_run_ids);
  manifest.sha256 = file_sha256(out_path);
  return manifest;
}

void write_json_file(const ordered_json& doc, const fs::path& path) {
  auto out = open_for_write(path);
  out << doc.dump(2) << '\n';
  if (!out) throw Error(ErrorCode::IoError, "write failed for " + path.string());
}

}  // namespace vigc
