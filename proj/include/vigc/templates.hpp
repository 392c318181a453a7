#pragma once

#include <filesystem>
#include <map>
#include <span>
#include <vector>

#include <nlohmann/json.hpp>

#include "vigc/rng.hpp"
#include "vigc/types.hpp"

namespace vigc {

/// Instruction templates grouped by task type, each list ordered by id.
class TemplateBank {
 public:
  /// Throws Error(EmptyText) for blank text, Error(DuplicateId) when (task, id)
  /// already exists, Error(InvalidArgument) for a non-positive id. Text is
  /// stored trimmed.
  void add(InstructionTemplate tmpl);

  /// Throws Error(InvalidArgument) when absent.
  const InstructionTemplate& get(TaskType task, int id) const;
  const InstructionTemplate* find(TaskType task, int id) const noexcept;

  std::size_t count(TaskType task) const noexcept;
  std::span<const InstructionTemplate> entries(TaskType task) const noexcept;
  std::size_t size() const noexcept;

  /// Entries of other replace entries with the same (task, id) and extend the rest.
  void merge(const TemplateBank& other);

  bool operator==(const TemplateBank&) const = default;

 private:
  std::map<TaskType, std::vector<InstructionTemplate>> entries_;
};

/// The forty shipped instruction templates, ten per task type, ids 1..10.
const TemplateBank& builtin_bank();

/// Uniform draw; identical rng state yields the identical template.
/// Throws Error(EmptyBank) when the task has no entries.
const InstructionTemplate& select_template(const TemplateBank& bank, TaskType task, Rng& rng);

// Bank files: JSON array of {"task", "id", "text"}.
TemplateBank bank_from_json(const nlohmann::json& doc);
nlohmann::json bank_to_json(const TemplateBank& bank);
TemplateBank load_bank(const std::filesystem::path& path);
void write_bank(const TemplateBank& bank, const std::filesystem::path& path);

}  // namespace vigc
