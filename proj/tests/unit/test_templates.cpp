#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <map>

#include "../support.hpp"
#include "vigc/error.hpp"
#include "vigc/templates.hpp"

using namespace vigc;

namespace {

ErrorCode code_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected an error");
  return ErrorCode::IoError;
}

}  // namespace

TEST_CASE("builtin bank shape and verbatim entries") {
  const auto& bank = builtin_bank();
  CHECK(bank.size() == 40);
  for (auto t : kAllTasks) {
    REQUIRE(bank.count(t) == 10);
    int expected = 1;
    for (const auto& e : bank.entries(t)) CHECK(e.id == expected++);
  }
  CHECK(bank.get(TaskType::Conversation, 1).text ==
        "Generate a question based on the content of the given image and then answer it.");
  CHECK(bank.get(TaskType::DetailDescription, 1).text ==
        "Generate a question to describe the image content in detail and then answer it.");
  CHECK(bank.count(TaskType::KnowledgeVqa) == 10);
  CHECK_THROWS_AS(bank.get(TaskType::Conversation, 11), Error);
}

TEST_CASE("select_template") {
  const auto& bank = builtin_bank();
  Rng a(99), b(99);
  CHECK(select_template(bank, TaskType::Conversation, a) == select_template(bank, TaskType::Conversation, b));

  TemplateBank single;
  single.add({3, TaskType::Conversation, "Only one."});
  for (std::uint64_t s = 0; s < 20; ++s) {
    Rng rng(s);
    CHECK(select_template(single, TaskType::Conversation, rng).text == "Only one.");
  }

  TemplateBank empty;
  Rng rng(0);
  CHECK(code_of([&] { select_template(empty, TaskType::Conversation, rng); }) == ErrorCode::EmptyBank);
  CHECK(code_of([&] { select_template(single, TaskType::KnowledgeVqa, rng); }) == ErrorCode::EmptyBank);
}

TEST_CASE("select_template covers the bank roughly uniformly") {
  std::map<int, int> hits;
  Rng rng(5);
  for (int i = 0; i < 10000; ++i) ++hits[select_template(builtin_bank(), TaskType::ComplexReasoning, rng).id];
  CHECK(hits.size() == 10);
  for (const auto& [id, n] : hits) {
    CHECK(n > 850);
    CHECK(n < 1150);
  }
}

TEST_CASE("load_bank") {
  testing::TempDir dir;
  testing::write_file(dir / "two.json",
                      R"([{"task":"conversation","id":1,"text":"Ask."},{"task":"conversation","id":2,"text":"Tell. "}])");
  auto bank = load_bank(dir / "two.json");
  CHECK(bank.count(TaskType::Conversation) == 2);
  CHECK(bank.get(TaskType::Conversation, 2).text == "Tell.");

  testing::write_file(dir / "dup.json",
                      R"([{"task":"detail","id":1,"text":"A."},{"task":"detail","id":1,"text":"B."}])");
  CHECK(code_of([&] { load_bank(dir / "dup.json"); }) == ErrorCode::DuplicateId);

  testing::write_file(dir / "blank.json", R"([{"task":"detail","id":1,"text":"  "}])");
  CHECK(code_of([&] { load_bank(dir / "blank.json"); }) == ErrorCode::EmptyText);

  testing::write_file(dir / "broken.json", R"([{"task":"detail",)");
  CHECK(code_of([&] { load_bank(dir / "broken.json"); }) == ErrorCode::ParseError);

  testing::write_file(dir / "task.json", R"([{"task":"poetry","id":1,"text":"A."}])");
  CHECK(code_of([&] { load_bank(dir / "task.json"); }) == ErrorCode::ParseError);

  CHECK(code_of([&] { load_bank(dir / "missing.json"); }) == ErrorCode::IoError);
}

TEST_CASE("bank file round-trip and merge") {
  testing::TempDir dir;
  write_bank(builtin_bank(), dir / "bank.json");
  CHECK(load_bank(dir / "bank.json") == builtin_bank());

  TemplateBank extra;
  extra.add({1, TaskType::Conversation, "Replacement."});
  extra.add({11, TaskType::Conversation, "Eleventh."});
  TemplateBank merged = builtin_bank();
  merged.merge(extra);
  CHECK(merged.count(TaskType::Conversation) == 11);
  CHECK(merged.get(TaskType::Conversation, 1).text == "Replacement.");
  CHECK(merged.get(TaskType::Conversation, 11).text == "Eleventh.");
}
