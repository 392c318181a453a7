#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdlib>
#include <sstream>

#include "../oracles.hpp"
#include "../support.hpp"
#include "vigc/commands.hpp"
#include "vigc/dataset.hpp"

using namespace vigc;
using json = nlohmann::json;
using testing::read_file;
using testing::TempDir;
using testing::write_file;

namespace {

struct Run {
  int code;
  std::string out;
  std::string err;
};

Run cli(std::vector<std::string> args) {
  args.insert(args.begin(), "vigc");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  int code = run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

const char* kCorrectingScript = R"({"rules":[
  {"stage":"generation","text":"Question: What is shown? Answer: A cat on a table."},
  {"stage":"correction","iteration":0,"text":"A dog sits on a chair. It looks happy."},
  {"stage":"correction","iteration":1,"text":"The chair is red.","finish":"stop"}
]})";

void write_manifest(const std::filesystem::path& path, int n) {
  std::vector<ImageRef> images;
  for (int i = 0; i < n; ++i) images.push_back(testing::image("img" + std::to_string(i)));
  write_image_index(images, path);
}

std::string data_file(const std::string& name) { return std::string(VIGC_TEST_DATA_DIR) + "/" + name; }

}  // namespace

TEST_CASE("help and usage errors") {
  CHECK(cli({"--help"}).code == 0);
  CHECK(cli({"pipeline", "--help"}).code == 0);
  CHECK(cli({}).code == 2);
  CHECK(cli({"pipeline", "--max-in-flight", "many"}).code == 2);
  CHECK(cli({"pipeline", "--no-such-flag"}).code == 2);
}

TEST_CASE("build-train") {
  TempDir dir;
  write_file(dir / "seed.jsonl",
             R"({"image":{"dataset":"d","image_id":"1","uri":"1.jpg"},"task":"conversation","question":"What?","answer":"Red."})" "\n"
             R"({"image":{"dataset":"d","image_id":"2","uri":"2.jpg"},"task":"conversation","question":"Where?","answer":"Here."})" "\n"
             R"({"image":{"dataset":"d","image_id":"3","uri":"3.jpg"},"task":"detail","question":"Describe.","answer":"A scene."})" "\n");
  auto out = (dir / "train").string();
  auto r = cli({"build-train", "--seed-file", (dir / "seed.jsonl").string(), "--format", "qa_jsonl", "--out", out,
                "--seed", "3"});
  REQUIRE(r.code == 0);
  CHECK(r.out.find("conversation: samples=2 records=2") != std::string::npos);
  auto manifest = json::parse(read_file(dir / "train/dataset_manifest.json"));
  CHECK(manifest["vig_train"]["record_count"] == 3);
  CHECK(manifest["vic_train"]["record_count"] == 3);
  CHECK(manifest["vig_train"]["sha256"] == file_sha256(dir / "train/vig_train.jsonl"));
  auto first = json::parse(read_file(dir / "train/vig_train.jsonl").substr(0, read_file(dir / "train/vig_train.jsonl").find('\n')));
  CHECK(first["target"] == "Question: What? Answer: Red.");
  CHECK(std::filesystem::exists(dir / "train/run_manifest.json"));

  auto again = cli({"build-train", "--seed-file", (dir / "seed.jsonl").string(), "--format", "qa_jsonl", "--out",
                    (dir / "train2").string(), "--seed", "3"});
  CHECK(again.code == 0);
  CHECK(read_file(dir / "train/vig_train.jsonl") == read_file(dir / "train2/vig_train.jsonl"));

  auto missing = cli({"build-train", "--seed-file", (dir / "nope.json").string(), "--out", out});
  CHECK(missing.code == 1);
  CHECK(missing.err.find("nope.json") != std::string::npos);

  write_file(dir / "broken.json", "[{");
  CHECK(cli({"build-train", "--seed-file", (dir / "broken.json").string(), "--task", "conversation", "--out", out})
            .code == 2);
}

TEST_CASE("filter") {
  TempDir dir;
  write_manifest(dir / "index.jsonl", 5);
  write_file(dir / "test_ids.txt", "img1\nimg3\n");
  write_file(dir / "used.txt", "img4\n");
  auto r = cli({"filter", "--index", (dir / "index.jsonl").string(), "--exclude", (dir / "test_ids.txt").string(),
                "--used", (dir / "used.txt").string(), "--out", (dir / "manifest.jsonl").string()});
  REQUIRE(r.code == 0);
  auto kept = load_image_index(dir / "manifest.jsonl");
  REQUIRE(kept.size() == 2);
  CHECK(kept[0].image_id == "img0");
  CHECK(kept[1].image_id == "img2");
}

TEST_CASE("generate then correct") {
  TempDir dir;
  write_manifest(dir / "m.jsonl", 3);
  write_file(dir / "mock.json", kCorrectingScript);
  auto g = cli({"generate", "--manifest", (dir / "m.jsonl").string(), "--mock-script", (dir / "mock.json").string(),
                "--out", (dir / "gen.jsonl").string()});
  REQUIRE(g.code == 0);
  auto gen = read_records(dir / "gen.jsonl");
  REQUIRE(gen.size() == 3);
  for (const auto& r : gen) CHECK(r.status == RecordStatus::VigOnly);
  CHECK(std::filesystem::exists(dir / "gen.jsonl.run.json"));

  auto c = cli({"correct", "--in", (dir / "gen.jsonl").string(), "--mock-script", (dir / "mock.json").string(),
                "--out", (dir / "cor.jsonl").string()});
  REQUIRE(c.code == 0);
  auto cor = read_records(dir / "cor.jsonl");
  REQUIRE(cor.size() == 3);
  CHECK(cor[0].status == RecordStatus::Corrected);
  CHECK(cor[0].vic_answer == "A dog sits on a chair. The chair is red.");
  CHECK(cor[0].iqf_trace->termination == Termination::StopSymbol);

  CHECK(cli({"generate", "--manifest", (dir / "m.jsonl").string(), "--out", (dir / "x.jsonl").string()}).code == 2);
  CHECK(cli({"correct", "--in", (dir / "gen.jsonl").string(), "--mock-script", (dir / "mock.json").string(), "--out",
             (dir / "gen.jsonl").string()})
            .code == 2);
}

TEST_CASE("pipeline: corrected records, determinism and resume") {
  TempDir dir;
  write_manifest(dir / "m.jsonl", 3);
  write_file(dir / "mock.json", kCorrectingScript);
  auto run = [&](const std::string& out) {
    return cli({"pipeline", "--manifest", (dir / "m.jsonl").string(), "--mock-script", (dir / "mock.json").string(),
                "--out", (dir / out).string(), "--seed", "11", "--max-in-flight", "3"});
  };
  auto a = run("a");
  REQUIRE(a.code == 0);
  auto records = read_records(dir / "a/records.jsonl");
  REQUIRE(records.size() == 3);
  for (const auto& r : records) CHECK(r.status == RecordStatus::Corrected);
  auto summary = json::parse(read_file(dir / "a/summary.json"));
  CHECK(summary["status"]["corrected"] == 3);
  CHECK(summary["termination"]["stop_symbol"] == 3);

  REQUIRE(run("b").code == 0);
  for (auto f : {"records.jsonl", "llava.json", "dataset_manifest.json", "summary.json"}) {
    CHECK_MESSAGE(read_file(dir / "a" / f) == read_file(dir / "b" / f), f);
  }
  auto manifest_a = json::parse(read_file(dir / "a/run_manifest.json"));
  auto manifest_b = json::parse(read_file(dir / "b/run_manifest.json"));
  manifest_a.erase("output");
  manifest_b.erase("output");
  CHECK(manifest_a == manifest_b);

  auto resumed = run("a");
  REQUIRE(resumed.code == 0);
  CHECK(resumed.out.find("resumed: 3, processed: 0") != std::string::npos);
  CHECK(read_file(dir / "a/records.jsonl") == read_file(dir / "b/records.jsonl"));
}

TEST_CASE("pipeline against an unreachable endpoint") {
  TempDir dir;
  write_manifest(dir / "m.jsonl", 2);
  auto r = cli({"pipeline", "--manifest", (dir / "m.jsonl").string(), "--backend-endpoint", "http://127.0.0.1:1",
                "--max-retries", "0", "--timeout", "2", "--out", (dir / "o").string()});
  CHECK(r.code == 0);
  CHECK(r.out.find("warning: 2 record(s) failed") != std::string::npos);
  auto records = read_records(dir / "o/records.jsonl");
  REQUIRE(records.size() == 2);
  for (const auto& rec : records) CHECK(rec.status == RecordStatus::BackendFailed);
}

TEST_CASE("config file overlay; flags win") {
  TempDir dir;
  write_manifest(dir / "m.jsonl", 2);
  write_file(dir / "mock.json", kCorrectingScript);
  write_file(dir / "config.json", json{{"manifest", (dir / "m.jsonl").string()},
                                       {"mock_script", (dir / "mock.json").string()},
                                       {"out", (dir / "from-config").string()},
                                       {"max_iters", 1},
                                       {"seed", 99}}
                                      .dump());
  auto r = cli({"pipeline", "--config", (dir / "config.json").string(), "--out", (dir / "from-flag").string()});
  REQUIRE(r.code == 0);
  CHECK(std::filesystem::exists(dir / "from-flag/records.jsonl"));
  CHECK_FALSE(std::filesystem::exists(dir / "from-config"));
  auto run_manifest = json::parse(read_file(dir / "from-flag/run_manifest.json"));
  CHECK(run_manifest["seed"] == 99);
  CHECK(run_manifest["iqf"]["max_iterations"] == 1);
  auto records = read_records(dir / "from-flag/records.jsonl");
  CHECK(records[0].iqf_trace->termination == Termination::MaxIterations);

  write_file(dir / "bad.json", R"({"max_iters":"lots"})");
  CHECK(cli({"pipeline", "--config", (dir / "bad.json").string()}).code == 2);
  write_file(dir / "broken.json", "{");
  CHECK(cli({"pipeline", "--config", (dir / "broken.json").string()}).code == 2);
  CHECK(cli({"pipeline", "--config", (dir / "absent.json").string()}).code == 1);
  CHECK(cli({"pipeline", "--config", (dir / "config.json").string(), "--max-in-flight", "0"}).code == 2);
}

TEST_CASE("run manifest redacts the api key") {
  TempDir dir;
  write_manifest(dir / "m.jsonl", 1);
  write_file(dir / "mock.json", kCorrectingScript);
  ::setenv("VIGC_API_KEY", "top-secret-key", 1);
  auto r = cli({"pipeline", "--manifest", (dir / "m.jsonl").string(), "--mock-script", (dir / "mock.json").string(),
                "--out", (dir / "o").string()});
  ::unsetenv("VIGC_API_KEY");
  REQUIRE(r.code == 0);
  auto text = read_file(dir / "o/run_manifest.json");
  CHECK(text.find("top-secret-key") == std::string::npos);
  CHECK(json::parse(text)["api_key"] == "<redacted>");
}

TEST_CASE("stats on a five-record fixture matches the golden report") {
  TempDir dir;
  auto r = cli({"stats", "--in", data_file("stats_fixture.jsonl"), "--out", (dir / "s").string(), "--label", "fixture"});
  REQUIRE(r.code == 0);
  auto report = json::parse(read_file(dir / "s/stats.json"));
  auto golden = json::parse(read_file(data_file("stats_golden.json")));
  auto distance = report["mean_q_distance"].get<double>();
  CHECK(std::abs(distance - golden["mean_q_distance"].get<double>()) < 1e-9);

  std::vector<std::string> questions;
  for (const auto& rec : read_records(data_file("stats_fixture.jsonl"))) questions.push_back(rec.vig_pair->question);
  CHECK(std::abs(distance - *oracle::mean_question_distance(questions)) < 1e-9);

  report.erase("mean_q_distance");
  golden.erase("mean_q_distance");
  CHECK(report == golden);
  CHECK(read_file(dir / "s/stats.txt") == read_file(data_file("stats_golden.txt")));
}

TEST_CASE("audit") {
  TempDir dir;
  std::vector<GenerationRecord> records{testing::vig_record("1", "Q?", "A dog runs. A cat sleeps."),
                                        testing::vig_record("2", "Q?", "Two cars.")};
  write_records(records, dir / "r.jsonl");
  write_file(dir / "ann.json", R"({"images":{"1":["dog"],"2":["car"]}})");
  auto r = cli({"audit", "--in", (dir / "r.jsonl").string(), "--annotations", (dir / "ann.json").string(),
                "--field", "vig", "--out", (dir / "a").string()});
  REQUIRE(r.code == 0);
  auto report = json::parse(read_file(dir / "a/audit.json"));
  CHECK(report["vig"]["hallucination_count"] == 1);
  CHECK(report["vig"]["second_half"] == 1);
  CHECK(read_file(dir / "a/audit.txt").starts_with("Model  H. Count  1st 50%  2nd 50%  H. Word\n"));

  write_file(dir / "partial.json", R"({"images":{"1":["dog"]}})");
  auto missing = cli({"audit", "--in", (dir / "r.jsonl").string(), "--annotations", (dir / "partial.json").string(),
                      "--out", (dir / "b").string()});
  CHECK(missing.code == 2);
  CHECK(missing.err.find("image 2") != std::string::npos);
}

TEST_CASE("judge") {
  TempDir dir;
  write_file(dir / "items.jsonl", R"({"category":"conv","question":"q","reference":"r","candidate":"c"})" "\n");
  write_file(dir / "judge.json", R"({"rules":[{"ref":8,"cand":8,"rationale":"tie"}]})");
  auto r = cli({"judge", "--in", (dir / "items.jsonl").string(), "--mock-judge", (dir / "judge.json").string(),
                "--out", (dir / "j").string()});
  REQUIRE(r.code == 0);
  auto report = json::parse(read_file(dir / "j/judge.json"));
  CHECK(report["overall"] == 100.0);
  CHECK(r.out.find("overall: 100.0") != std::string::npos);

  write_file(dir / "bad.jsonl", "{\"category\":1}\n");
  CHECK(cli({"judge", "--in", (dir / "bad.jsonl").string(), "--mock-judge", (dir / "judge.json").string(), "--out",
             (dir / "k").string()})
            .code == 2);
}
