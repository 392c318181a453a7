#include "vigc/templates.hpp"

#include <algorithm>
#include <fstream>

#include "vigc/error.hpp"
#include "vigc/text.hpp"

namespace vigc {

namespace {

constexpr const char* kConversation[] = {
    "Generate a question based on the content of the given image and then answer it.",
    "Given the image, generate a question along with the answer.",
    "From the image provided, craft a question and answer it.",
    "Come up with a question related to the content of the image and provide the answer.",
    "Brainstorm a query associated to the image and provide the response.",
    "Construct a question based on the information presented in the image and answer it.",
    "Ask yourself a question about the content of the image and respond to it.",
    "Establish a query related to the content of the image and give the answer.",
    "Ask a question derived from the image and then answer it.",
    "Create a question about the image and answer it.",
};

constexpr const char* kDetail[] = {
    "Generate a question to describe the image content in detail and then answer it.",
    "Considering the picture, come up with a question to describe the image content in detail along with the "
    "answer.",
    "Describe the image content with a question and give the response.",
    "Come up with a creative question to express the image content and then provide the answer.",
    "Draft a query to address the image content and give the reply.",
    "Create a question to reveal the image content and give the resolution.",
    "Given the photo, state a question that reveals the details of the image and then answer it.",
    "Ask a question about what is depicted in the image and then answer it.",
    "Make up a query to explain the photo in more detail and answer it.",
    "Compose a question describing the subject of the image, followed by the answer.",
};

constexpr const char* kComplex[] = {
    "Based on the given image, generate an in-depth reasoning question and then answer it.",
    "Given the image, generate an in-depth reasoning question and answer.",
    "Taking the image into account, generate an reasoning question along with the answer.",
    "Can you come up with a reasoning question based on the image and then provide the answer?",
    "After looking at the image, devise a reasoning question and provide the answer to it.",
    "Contemplate the image and create a reasoning question with the answer provided.",
    "Analyze the image and provide a reasoning question as well as the answer.",
    "Compose a reasoning question using the image with its answer.",
    "Evaluate the image and create a comprehensive reasoning question and its answer.",
    "Analyze the image and craft an effective reasoning question and its response.",
};

constexpr const char* kKnowledge[] = {
    "Based on the content of the given image, generate a question that requires common sense to answer and then "
    "briefly answer it.",
    "Construct a question that draws upon common sense to answer, using the content presented in the given image, "
    "and then briefly answer it.",
    "Explain the content of the image in a question and then provide a short answer using knowledge types such as "
    "commonsense and facts.",
    "Generate a query that requires reasoning on the information depicted in the image, utilizing a variety of "
    "knowledge types like commonsense, and then offer a concise answer.",
    "Develop a query to demonstrate the knowledge types such as commonsense and facts related to the given image "
    "and then provide a brief answer.",
    "Based on knowledge types such as commonsense and facts, come up with a query related to the given image and "
    "then briefly answer it.",
    "Come up with a question related to the content shown in the image that requires reasoning using a variety of "
    "knowledge types such as commonsense and then succinctly answer it.",
    "Brainstorm a question about the content of the given image that requires reasoning with a variety of "
    "knowledge types such as common sense and then state the answer briefly.",
    "Construct a query that requires logic based on the contents of the given image and involves a variety of "
    "knowledge types such as commonsense, and then deliver a brief response.",
    "Invent an inquiry derived from the pictured material that calls for the use of different knowledge types "
    "like commonsense and subsequently summarize the solution with brevity.",
};

TemplateBank make_builtin() {
  TemplateBank bank;
  auto add_all = [&bank](TaskType task, const auto& texts) {
    int id = 1;
    for (const char* text : texts) bank.add({id++, task, text});
  };
  add_all(TaskType::Conversation, kConversation);
  add_all(TaskType::DetailDescription, kDetail);
  add_all(TaskType::ComplexReasoning, kComplex);
  add_all(TaskType::KnowledgeVqa, kKnowledge);
  return bank;
}

}  // namespace

void TemplateBank::add(InstructionTemplate tmpl) {
  tmpl.text = trim(tmpl.text);
  if (tmpl.text.empty()) {
    throw Error(ErrorCode::EmptyText, std::string("template ") + std::string(to_string(tmpl.task)) + "#" +
                                          std::to_string(tmpl.id) + " has empty text");
  }
  if (tmpl.id < 1) throw Error(ErrorCode::InvalidArgument, "template id must be positive");
  auto& list = entries_[tmpl.task];
  auto pos = std::lower_bound(list.begin(), list.end(), tmpl.id,
                              [](const InstructionTemplate& t, int id) { return t.id < id; });
  if (pos != list.end() && pos->id == tmpl.id) {
    throw Error(ErrorCode::DuplicateId, std::string("duplicate template ") + std::string(to_string(tmpl.task)) +
                                            "#" + std::to_string(tmpl.id));
  }
  list.insert(pos, std::move(tmpl));
}

const InstructionTemplate* TemplateBank::find(TaskType task, int id) const noexcept {
  auto it = entries_.find(task);
  if (it == entries_.end()) return nullptr;
  for (const auto& t : it->second) {
    if (t.id == id) return &t;
  }
  return nullptr;
}

const InstructionTemplate& TemplateBank::get(TaskType task, int id) const {
  if (const auto* t = find(task, id)) return *t;
  throw Error(ErrorCode::InvalidArgument,
              "no template " + std::string(to_string(task)) + "#" + std::to_string(id));
}

std::size_t TemplateBank::count(TaskType task) const noexcept {
  auto it = entries_.find(task);
  return it == entries_.end() ? 0 : it->second.size();
}

std::span<const InstructionTemplate> TemplateBank::entries(TaskType task) const noexcept {
  auto it = entries_.find(task);
  if (it == entries_.end()) return {};
  return it->second;
}

std::size_t TemplateBank::size() const noexcept {
  std::size_t n = 0;
  for (const auto& [task, list] : entries_) n += list.size();
  return n;
}

void TemplateBank::merge(const TemplateBank& other) {
  for (const auto& [task, list] : other.entries_) {
    for (const auto& t : list) {
      auto& mine = entries_[task];
      auto it = std::find_if(mine.begin(), mine.end(), [&](const InstructionTemplate& x) { return x.id == t.id; });
      if (it != mine.end()) {
        it->text = t.text;
      } else {
        add(t);
      }
    }
  }
}

const TemplateBank& builtin_bank() {
  static const TemplateBank bank = make_builtin();
  return bank;
}

const InstructionTemplate& select_template(const TemplateBank& bank, TaskType task, Rng& rng) {
  auto list = bank.entries(task);
  if (list.empty()) {
    throw Error(ErrorCode::EmptyBank, "no templates for task " + std::string(to_string(task)));
  }
  return list[rng.uniform_index(list.size())];
}

TemplateBank bank_from_json(const nlohmann::json& doc) {
  if (!doc.is_array()) throw Error(ErrorCode::ParseError, "template bank must be a JSON array");
  TemplateBank bank;
  std::size_t row = 0;
  for (const auto& item : doc) {
    if (!item.is_object() || !item.contains("task") || !item.contains("id") || !item.contains("text") ||
        !item["task"].is_string() || !item["id"].is_number_integer() || !item["text"].is_string()) {
      throw Error(ErrorCode::ParseError, "template row " + std::to_string(row) + " needs task, id and text");
    }
    TaskType task;
    try {
      task = parse_task(item["task"].get<std::string>());
    } catch (const Error& e) {
      throw Error(ErrorCode::ParseError, "template row " + std::to_string(row) + ": " + e.what());
    }
    bank.add({item["id"].get<int>(), task, item["text"].get<std::string>()});
    ++row;
  }
  return bank;
}

nlohmann::json bank_to_json(const TemplateBank& bank) {
  auto doc = nlohmann::json::array();
  for (TaskType task : kAllTasks) {
    for (const auto& t : bank.entries(task)) {
      doc.push_back({{"task", to_string(t.task)}, {"id", t.id}, {"text", t.text}});
    }
  }
  return doc;
}

TemplateBank load_bank(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::IoError, "cannot open template bank " + path.string());
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw Error(ErrorCode::ParseError, path.string() + " at byte " + std::to_string(e.byte));
  }
  return bank_from_json(doc);
}

void write_bank(const TemplateBank& bank, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::IoError, "cannot write template bank " + path.string());
  out << bank_to_json(bank).dump(2) << '\n';
}

}  // namespace vigc
