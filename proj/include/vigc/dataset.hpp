#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <mutex>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "vigc/templates.hpp"
#include "vigc/types.hpp"

namespace vigc {

inline constexpr const char* kToolVersion = "vigc 0.1.0";

// ---------------------------------------------------------------------------
// GenerationRecord JSONL

nlohmann::ordered_json record_to_json(const GenerationRecord& record);
/// Throws Error(ParseError).
GenerationRecord record_from_json(const nlohmann::json& doc);

/// Throws Error(ParseError) naming the 1-based line, Error(IoError).
void for_each_record(const std::filesystem::path& path, const std::function<void(GenerationRecord)>& fn);
std::vector<GenerationRecord> read_records(const std::filesystem::path& path);
void write_records(std::span<const GenerationRecord> records, const std::filesystem::path& path);

/// Appends one JSON line per record; safe to share between worker threads.
class RecordWriter {
 public:
  explicit RecordWriter(const std::filesystem::path& path, bool truncate = false);
  void write(const GenerationRecord& record);
  void flush();

 private:
  std::mutex mu_;
  std::ofstream out_;
};

// ---------------------------------------------------------------------------
// Seed datasets

enum class SeedFormat { LlavaJson, QaJsonl };

SeedFormat parse_seed_format(std::string_view name);

struct SeedLoadOptions {
  // Used when an entry carries no "task" field.
  std::optional<TaskType> task;
  std::string dataset = "coco2017-train";
};

struct SeedLoadResult {
  std::vector<SeedRecord> records;
  std::map<TaskType, std::size_t> samples_per_task;  // source entries
  std::map<TaskType, std::size_t> records_per_task;  // flattened turns
};

/// LLaVA conversations are flattened to one SeedRecord per human/gpt turn pair.
/// Throws Error(ParseError) with a byte offset or entry index, Error(UnknownTask).
SeedLoadResult load_seed_dataset(const std::filesystem::path& path, SeedFormat format,
                                 const SeedLoadOptions& options = {});

void write_seed_jsonl(std::span<const SeedRecord> seeds, const std::filesystem::path& path);

// ---------------------------------------------------------------------------
// Training corpora

struct VigTrainingSample {
  ImageRef image;
  TaskType task = TaskType::Conversation;
  int template_id = 0;
  std::string instruction;
  std::string target;  // "Question: {q} Answer: {a}"

  bool operator==(const VigTrainingSample&) const = default;
};

struct VicTrainingSample {
  ImageRef image;
  TaskType task = TaskType::Conversation;
  std::string question;
  std::string answer;

  bool operator==(const VicTrainingSample&) const = default;
};

/// One sample per seed, instruction drawn with select_template from a single
/// rng stream seeded by rng_seed. Throws Error(EmptyBank).
std::vector<VigTrainingSample> build_vig_training_set(std::span<const SeedRecord> seeds, const TemplateBank& bank,
                                                      std::uint64_t rng_seed);
std::vector<VicTrainingSample> build_vic_training_set(std::span<const SeedRecord> seeds);

void write_vig_training_set(std::span<const VigTrainingSample> samples, const std::filesystem::path& path);
void write_vic_training_set(std::span<const VicTrainingSample> samples, const std::filesystem::path& path);

// ---------------------------------------------------------------------------
// Image manifests

struct ImageManifest {
  std::vector<ImageRef> images;
  std::string provenance;
  std::size_t excluded_count = 0;
};

/// JSONL of {"dataset", "image_id", "uri"}; repeated (dataset, image_id)
/// entries keep the first occurrence.
std::vector<ImageRef> load_image_index(const std::filesystem::path& path);
void write_image_index(std::span<const ImageRef> images, const std::filesystem::path& path);

/// Image ids from a plain id list (one per line, '#' comments), a JSONL
/// index (.jsonl, "image_id"), or a LLaVA JSON file (.json, stem of "image").
std::set<std::string> load_id_set(const std::filesystem::path& path);

/// index minus exclusion minus already_used, order preserved. The result is
/// checked against both sets before returning.
ImageManifest build_image_manifest(std::span<const ImageRef> index, const std::set<std::string>& exclusion,
                                   const std::set<std::string>& already_used, std::string provenance = {});

// ---------------------------------------------------------------------------
// Dedup and export

/// Keeps the first record per (image_id, lowercased punctuation-free
/// question). Records without a question are always kept.
std::vector<GenerationRecord> dedup_records(std::span<const GenerationRecord> records);

struct DatasetManifest {
  std::string file;
  std::size_t record_count = 0;
  std::map<TaskType, std::size_t> counts;
  std::vector<std::string> source_run_ids;
  std::string tool_version = kToolVersion;
  std::string sha256;

  nlohmann::ordered_json to_json() const;
};

/// Hex SHA-256 of the file's bytes.
std::string file_sha256(const std::filesystem::path& path);

/// LLaVA conversations JSON. Corrected records export vic_answer, VigOnly
/// records the VIG answer. Throws Error(InvalidStatus) for other statuses.
DatasetManifest export_llava_format(std::span<const GenerationRecord> records, const std::filesystem::path& out,
                                    std::vector<std::string> source_run_ids = {});

void write_json_file(const nlohmann::ordered_json& doc, const std::filesystem::path& path);

}  // namespace vigc
