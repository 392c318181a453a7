#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <random>

#include "../support.hpp"
#include "vigc/dataset.hpp"
#include "vigc/error.hpp"

using namespace vigc;
using json = nlohmann::json;
using testing::read_file;
using testing::TempDir;
using testing::write_file;

namespace {

ErrorCode code_of(auto&& fn, std::string* message = nullptr) {
  try {
    fn();
  } catch (const Error& e) {
    if (message != nullptr) *message = e.what();
    return e.code();
  }
  FAIL("expected an error");
  return ErrorCode::IoError;
}

GenerationRecord corrected(const std::string& id, const std::string& q, const std::string& a, const std::string& vic) {
  auto r = testing::vig_record(id, q, a);
  r.status = RecordStatus::Corrected;
  r.vic_answer = vic;
  r.iqf_trace = IqfTrace{{vic}, {vic + " tail"}, Termination::StopSymbol};
  return r;
}

}  // namespace

TEST_CASE("record JSON layout is exact") {
  auto r = corrected("42", "What?", "Red.", "Blue.");
  CHECK(record_to_json(r).dump() ==
        R"({"image":{"dataset":"coco2017-train","image_id":"42","uri":"images/42.jpg"},"task":"conversation",)"
        R"("template_id":1,"raw_vig_output":"Question: What? Answer: Red.","question":"What?","vig_answer":"Red.",)"
        R"("vic_answer":"Blue.","iqf":{"accepted":["Blue."],"raw":["Blue. tail"],"termination":"stop_symbol"},)"
        R"("status":"corrected"})");
  GenerationRecord failed;
  failed.image = testing::image("7");
  failed.status = RecordStatus::ParseFailed;
  failed.raw_vig_output = "prose";
  CHECK(record_to_json(failed).dump() ==
        R"({"image":{"dataset":"coco2017-train","image_id":"7","uri":"images/7.jpg"},"task":"conversation",)"
        R"("template_id":0,"raw_vig_output":"prose","question":null,"vig_answer":null,"vic_answer":null,"iqf":null,)"
        R"("status":"parse_failed"})");
}

TEST_CASE("records file round-trip") {
  TempDir dir;
  std::vector<GenerationRecord> records{testing::vig_record("1", "Q1?", "A1."), corrected("2", "Q2?", "A2.", "B2."),
                                        testing::vig_record("3", "Q3?", "A3.", TaskType::KnowledgeVqa, 7)};
  write_records(records, dir / "r.jsonl");
  CHECK(read_records(dir / "r.jsonl") == records);

  write_file(dir / "empty.jsonl", "");
  CHECK(read_records(dir / "empty.jsonl").empty());
  CHECK(code_of([&] { read_records(dir / "absent.jsonl"); }) == ErrorCode::IoError);
}

TEST_CASE("record parse errors name the line") {
  TempDir dir;
  auto good = record_to_json(testing::vig_record("1", "Q?", "A.")).dump();
  auto missing = json::parse(good);
  missing.erase("status");
  write_file(dir / "bad.jsonl", good + "\n" + missing.dump() + "\n");
  std::string message;
  CHECK(code_of([&] { read_records(dir / "bad.jsonl"); }, &message) == ErrorCode::ParseError);
  CHECK(message.find("line 2") != std::string::npos);
  CHECK(message.find("status") != std::string::npos);

  write_file(dir / "trunc.jsonl", good.substr(0, 30) + "\n");
  CHECK(code_of([&] { read_records(dir / "trunc.jsonl"); }, &message) == ErrorCode::ParseError);
  CHECK(message.find("line 1") != std::string::npos);

  auto inconsistent = json::parse(good);
  inconsistent["status"] = "corrected";
  write_file(dir / "inconsistent.jsonl", inconsistent.dump() + "\n");
  CHECK(code_of([&] { read_records(dir / "inconsistent.jsonl"); }) == ErrorCode::ParseError);
}

TEST_CASE("record writer appends line by line") {
  TempDir dir;
  {
    RecordWriter w(dir / "j.jsonl");
    w.write(testing::vig_record("1", "Q?", "A."));
  }
  {
    RecordWriter w(dir / "j.jsonl");
    w.write(testing::vig_record("2", "Q?", "A."));
  }
  auto back = read_records(dir / "j.jsonl");
  REQUIRE(back.size() == 2);
  CHECK(back[1].image.image_id == "2");
}

TEST_CASE("LLaVA seed loading") {
  TempDir dir;
  write_file(dir / "seed.json", R"([
    {"id":"000000123","image":"000000123.jpg","conversations":[
      {"from":"human","value":"<image>\nWhat is this?"},{"from":"gpt","value":"A bus."},
      {"from":"human","value":"What color?"},{"from":"gpt","value":"Red."}]},
    {"image":"coco/000000456.jpg","task":"detail","conversations":[
      {"from":"human","value":"Describe it.\n<image>"},{"from":"gpt","value":"A long description."}]}
  ])");
  SeedLoadOptions options;
  options.task = TaskType::Conversation;
  auto loaded = load_seed_dataset(dir / "seed.json", SeedFormat::LlavaJson, options);
  REQUIRE(loaded.records.size() == 3);
  CHECK(loaded.records[0].pair == QaPair{"What is this?", "A bus."});
  CHECK(loaded.records[1].pair == QaPair{"What color?", "Red."});
  CHECK(loaded.records[0].image.image_id == "000000123");
  CHECK(loaded.records[2].image.image_id == "000000456");
  CHECK(loaded.records[2].task == TaskType::DetailDescription);
  CHECK(loaded.records[2].pair.question == "Describe it.");
  CHECK(loaded.samples_per_task[TaskType::Conversation] == 1);
  CHECK(loaded.records_per_task[TaskType::Conversation] == 2);
  CHECK(loaded.samples_per_task[TaskType::DetailDescription] == 1);

  CHECK(code_of([&] { load_seed_dataset(dir / "seed.json", SeedFormat::LlavaJson); }) == ErrorCode::UnknownTask);
}

TEST_CASE("truncated seed file reports a byte offset") {
  TempDir dir;
  write_file(dir / "trunc.json", R"([{"id":"1","image":"1.jpg","conversations":[{"from":"hum)");
  std::string message;
  CHECK(code_of([&] { load_seed_dataset(dir / "trunc.json", SeedFormat::LlavaJson); }, &message) ==
        ErrorCode::ParseError);
  CHECK(message.find("byte offset") != std::string::npos);

  write_file(dir / "odd.json", R"([{"image":"1.jpg","task":"conversation","conversations":[{"from":"human","value":"q"}]}])");
  CHECK(code_of([&] { load_seed_dataset(dir / "odd.json", SeedFormat::LlavaJson); }, &message) == ErrorCode::ParseError);
  CHECK(message.find("entry 0") != std::string::npos);
}

TEST_CASE("QA JSONL seeds round-trip") {
  TempDir dir;
  std::vector<SeedRecord> seeds{{testing::image("1"), TaskType::Conversation, {"What color?", "Red."}},
                                {testing::image("2"), TaskType::KnowledgeVqa, {"Why?", "Because."}}};
  write_seed_jsonl(seeds, dir / "s.jsonl");
  auto loaded = load_seed_dataset(dir / "s.jsonl", SeedFormat::QaJsonl);
  CHECK(loaded.records == seeds);
}

TEST_CASE("training corpora") {
  std::vector<SeedRecord> one{{testing::image("1"), TaskType::Conversation, {"What color?", "Red."}}};
  TemplateBank single;
  single.add({4, TaskType::Conversation, "Only template."});
  auto vig = build_vig_training_set(one, single, 0);
  REQUIRE(vig.size() == 1);
  CHECK(vig[0].instruction == "Only template.");
  CHECK(vig[0].template_id == 4);
  CHECK(vig[0].target == "Question: What color? Answer: Red.");
  CHECK(build_vig_training_set({}, single, 0).empty());
  CHECK_THROWS_AS(build_vig_training_set(one, TemplateBank{}, 0), Error);

  auto vic = build_vic_training_set(one);
  REQUIRE(vic.size() == 1);
  CHECK(vic[0].image == one[0].image);
  CHECK(vic[0].question == "What color?");
  CHECK(vic[0].answer == "Red.");
  CHECK(build_vic_training_set({}).empty());

  std::vector<SeedRecord> many;
  for (int i = 0; i < 20; ++i) many.push_back({testing::image(std::to_string(i)), TaskType::Conversation, {"Q?", "A."}});
  auto many_vic = build_vic_training_set(many);
  REQUIRE(many_vic.size() == 20);
  for (int i = 0; i < 20; ++i) CHECK(many_vic[static_cast<std::size_t>(i)].image.image_id == std::to_string(i));
  CHECK(build_vig_training_set(many, builtin_bank(), 5) == build_vig_training_set(many, builtin_bank(), 5));
}

TEST_CASE("image manifests") {
  std::vector<ImageRef> index{testing::image("1"), testing::image("2"), testing::image("3")};
  auto m = build_image_manifest(index, {"2"}, {});
  REQUIRE(m.images.size() == 2);
  CHECK(m.images[0].image_id == "1");
  CHECK(m.images[1].image_id == "3");
  CHECK(m.excluded_count == 1);

  m = build_image_manifest(index, {"1", "2", "3", "4"}, {});
  CHECK(m.images.empty());
  CHECK(m.excluded_count == 3);

  m = build_image_manifest(index, {"1"}, {"3"});
  CHECK(m.images.size() == 1);
  CHECK(m.excluded_count == 2);
}

TEST_CASE("id sets from several file shapes") {
  TempDir dir;
  write_file(dir / "ids.txt", "# test split\n1\n 2 \n\n");
  CHECK(load_id_set(dir / "ids.txt") == std::set<std::string>{"1", "2"});
  write_image_index(std::vector<ImageRef>{testing::image("5"), testing::image("6")}, dir / "idx.jsonl");
  CHECK(load_id_set(dir / "idx.jsonl") == std::set<std::string>{"5", "6"});
  write_file(dir / "llava.json", R"([{"id":"x","image":"000000000009.jpg","conversations":[]},{"id":"y"}])");
  CHECK(load_id_set(dir / "llava.json") == std::set<std::string>{"000000000009", "y"});
}

TEST_CASE("image index keeps first duplicates") {
  TempDir dir;
  write_file(dir / "idx.jsonl", R"({"dataset":"d","image_id":"1","uri":"a.jpg"})" "\n"
                                R"({"dataset":"d","image_id":"1","uri":"b.jpg"})" "\n"
                                R"({"dataset":"e","image_id":"1","uri":"c.jpg"})" "\n");
  auto images = load_image_index(dir / "idx.jsonl");
  REQUIRE(images.size() == 2);
  CHECK(images[0].uri == "a.jpg");
  CHECK(images[1].dataset == "e");
}

TEST_CASE("dedup_records") {
  std::vector<GenerationRecord> r{testing::vig_record("1", "What color?", "Red."),
                                  testing::vig_record("1", "what color", "Blue.")};
  CHECK(dedup_records(r).size() == 1);
  CHECK(dedup_records(r)[0].vig_pair->answer == "Red.");
  r[1].image.image_id = "2";
  CHECK(dedup_records(r).size() == 2);
  CHECK(dedup_records({}).empty());
}

TEST_CASE("LLaVA export") {
  TempDir dir;
  std::vector<GenerationRecord> records{corrected("1", "What is it?", "A cat.", "A dog."),
                                        testing::vig_record("2", "Where?", "Outside.")};
  auto manifest = export_llava_format(records, dir / "out.json", {"run-1"});
  CHECK(manifest.record_count == 2);
  CHECK(manifest.counts[TaskType::Conversation] == 2);
  CHECK(manifest.sha256 == file_sha256(dir / "out.json"));
  CHECK(manifest.sha256.size() == 64);
  auto doc = json::parse(read_file(dir / "out.json"));
  CHECK(doc[0] == json::parse(R"({"id":"1","image":"images/1.jpg","conversations":[
    {"from":"human","value":"<image>\nWhat is it?"},{"from":"gpt","value":"A dog."}]})"));
  CHECK(doc[1]["conversations"][1]["value"] == "Outside.");

  SeedLoadOptions options;
  options.task = TaskType::Conversation;
  auto back = load_seed_dataset(dir / "out.json", SeedFormat::LlavaJson, options);
  REQUIRE(back.records.size() == 2);
  CHECK(back.records[0].pair == QaPair{"What is it?", "A dog."});
  CHECK(back.records[1].pair == QaPair{"Where?", "Outside."});
  CHECK(back.records[0].image.image_id == "1");
  CHECK(back.records[0].image.uri == "images/1.jpg");

  GenerationRecord failed;
  failed.image = testing::image("3");
  failed.status = RecordStatus::ParseFailed;
  records.push_back(failed);
  CHECK(code_of([&] { export_llava_format(records, dir / "bad.json"); }) == ErrorCode::InvalidStatus);
}

TEST_CASE("sha256 of a known string") {
  TempDir dir;
  write_file(dir / "abc.txt", "abc");
  CHECK(file_sha256(dir / "abc.txt") == "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
}
