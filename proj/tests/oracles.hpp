#pragma once

// Reference implementations written directly from the documented rules,
// without calling into the library, so the library can be checked against
// them.

#include <cctype>
#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <regex>
#include <string>
#include <utility>
#include <vector>

namespace vigc::oracle {

inline std::vector<std::string> sentences(const std::string& text) {
  // A sentence ends at . ! or ? when followed by whitespace or the end.
  static const std::regex piece(R"([\s\S]*?[.!?](?=\s|$)|[\s\S]+$)");
  std::vector<std::string> out;
  for (std::sregex_iterator it(text.begin(), text.end(), piece), end; it != end; ++it) {
    std::string s = it->str();
    auto b = s.find_first_not_of(" \t\n\r\f\v");
    if (b == std::string::npos) continue;
    auto e = s.find_last_not_of(" \t\n\r\f\v");
    out.push_back(s.substr(b, e - b + 1));
  }
  return out;
}

inline std::string lower(std::string s) {
  for (auto& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return s;
}

inline std::vector<std::string> tokens(const std::string& text) {
  std::string cleaned;
  for (char c : text) {
    if (c >= 0 && std::ispunct(static_cast<unsigned char>(c))) continue;
    cleaned.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
  }
  std::vector<std::string> out;
  std::string cur;
  for (char c : cleaned) {
    if (std::isspace(static_cast<unsigned char>(c))) {
      if (!cur.empty()) out.push_back(cur);
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  if (!cur.empty()) out.push_back(cur);
  return out;
}

struct IqfStep {
  std::string text;
  bool stop = true;
};

struct IqfOutcome {
  std::vector<std::string> accepted;
  std::string termination;
  int calls = 0;
};

// Steps beyond the script length answer "" with a stop flag.
inline IqfOutcome iqf(const std::vector<IqfStep>& script, int max_iterations, bool dedup_guard) {
  IqfOutcome out;
  for (int k = 0; k < max_iterations; ++k) {
    IqfStep step = k < static_cast<int>(script.size()) ? script[static_cast<std::size_t>(k)] : IqfStep{"", true};
    ++out.calls;
    auto parts = sentences(step.text);
    if (parts.empty()) {
      out.termination = "empty_continuation";
      return out;
    }
    bool repeat = false;
    for (const auto& a : out.accepted) repeat = repeat || lower(a) == lower(parts[0]);
    if (dedup_guard && repeat) {
      out.termination = "repeated_sentence";
      return out;
    }
    out.accepted.push_back(parts[0]);
    if (step.stop && parts.size() <= 1) {
      out.termination = "stop_symbol";
      return out;
    }
  }
  out.termination = "max_iterations";
  return out;
}

inline std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 14695981039346656037ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

// Term-frequency feature hashing, not normalized.
inline std::vector<double> hashed_counts(const std::string& text, std::size_t dim = 512) {
  std::vector<double> v(dim, 0.0);
  for (const auto& t : tokens(text)) v[fnv1a(t) % dim] += 1.0;
  bool zero = true;
  for (double x : v) zero = zero && x == 0.0;
  if (zero) v[0] = 1.0;
  return v;
}

inline double cosine_distance(const std::vector<double>& a, const std::vector<double>& b) {
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    dot += a[i] * b[i];
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  return 1.0 - dot / (std::sqrt(na) * std::sqrt(nb));
}

inline std::optional<double> mean_question_distance(const std::vector<std::string>& questions) {
  if (questions.size() < 2) return std::nullopt;
  std::vector<std::vector<double>> v;
  for (const auto& q : questions) v.push_back(hashed_counts(q));
  double sum = 0.0;
  std::size_t pairs = 0;
  for (std::size_t i = 0; i < v.size(); ++i) {
    for (std::size_t j = 0; j < v.size(); ++j) {
      if (i >= j) continue;
      sum += cosine_distance(v[i], v[j]);
      ++pairs;
    }
  }
  return sum / static_cast<double>(pairs);
}

struct Score {
  std::string category;
  double ref;
  double cand;
};

inline std::map<std::string, double> relative(const std::vector<Score>& items) {
  std::map<std::string, std::pair<double, double>> sums;
  double ref = 0.0, cand = 0.0;
  for (const auto& s : items) {
    sums[s.category].first += s.ref;
    sums[s.category].second += s.cand;
    ref += s.ref;
    cand += s.cand;
  }
  std::map<std::string, double> out;
  for (const auto& [c, rc] : sums) out[c] = 100.0 * rc.second / rc.first;
  out["overall"] = 100.0 * cand / ref;
  return out;
}

}  // namespace vigc::oracle
