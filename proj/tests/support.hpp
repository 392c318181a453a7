#pragma once

#include <atomic>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "vigc/types.hpp"

namespace vigc::testing {

// Scratch directory removed on destruction.
class TempDir {
 public:
  TempDir() {
    static std::atomic<int> counter{0};
    auto stamp = std::chrono::steady_clock::now().time_since_epoch().count();
    path_ = std::filesystem::temp_directory_path() /
            ("vigc-test-" + std::to_string(stamp) + "-" + std::to_string(counter++));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

inline void write_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  out << text;
}

inline std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline ImageRef image(const std::string& id, const std::string& dataset = "coco2017-train") {
  return ImageRef{dataset, id, "images/" + id + ".jpg", nullptr};
}

inline GenerationRecord vig_record(const std::string& image_id, const std::string& q, const std::string& a,
                                   TaskType task = TaskType::Conversation, int template_id = 1) {
  GenerationRecord r;
  r.image = image(image_id);
  r.task = task;
  r.template_id = template_id;
  r.raw_vig_output = "Question: " + q + " Answer: " + a;
  r.vig_pair = QaPair{q, a};
  r.status = RecordStatus::VigOnly;
  return r;
}

// Random lowercase words; never produces the parser markers.
inline std::string random_words(std::mt19937_64& rng, int min_words, int max_words) {
  static const std::vector<std::string> vocab = {
      "red",  "bus",   "dog",   "table", "laptop", "park",  "green", "the",   "a",    "is",
      "on",   "near",  "small", "large", "person", "cup",   "chair", "sky",   "tree", "blue",
      "sits", "holds", "runs",  "what",  "where",  "color", "many",  "there", "two",  "three"};
  std::uniform_int_distribution<int> count(min_words, max_words);
  std::uniform_int_distribution<std::size_t> pick(0, vocab.size() - 1);
  std::string out;
  int n = count(rng);
  for (int i = 0; i < n; ++i) {
    if (i > 0) out += ' ';
    out += vocab[pick(rng)];
  }
  return out;
}

}  // namespace vigc::testing
