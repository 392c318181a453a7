#include "vigc/text.hpp"

#include <cctype>

#include "vigc/error.hpp"

namespace vigc {

namespace {

bool is_space(char c) noexcept { return std::isspace(static_cast<unsigned char>(c)) != 0; }

bool is_ascii_punct(char c) noexcept {
  auto u = static_cast<unsigned char>(c);
  return u < 0x80 && std::ispunct(u) != 0;
}

bool is_delimiter(char c) noexcept { return c == '.' || c == '!' || c == '?'; }

}  // namespace

std::string trim_left(std::string_view text) {
  std::size_t b = 0;
  while (b < text.size() && is_space(text[b])) ++b;
  return std::string(text.substr(b));
}

std::string trim_right(std::string_view text) {
  std::size_t e = text.size();
  while (e > 0 && is_space(text[e - 1])) --e;
  return std::string(text.substr(0, e));
}

std::string trim(std::string_view text) { return trim_left(trim_right(text)); }

bool is_blank(std::string_view text) noexcept {
  for (char c : text) {
    if (!is_space(c)) return false;
  }
  return true;
}

std::string collapse_whitespace(std::string_view text) {
  std::string out;
  out.reserve(text.size());
  bool pending_space = false;
  for (char c : text) {
    if (is_space(c)) {
      pending_space = !out.empty();
      continue;
    }
    if (pending_space) out.push_back(' ');
    pending_space = false;
    out.push_back(c);
  }
  return out;
}

std::string to_lower(std::string_view text) {
  std::string out(text);
  for (char& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

std::string strip_punctuation(std::string_view text) {
  std::string out;
  out.reserve(text.size());
  for (char c : text) {
    if (!is_ascii_punct(c)) out.push_back(c);
  }
  return out;
}

std::vector<std::string> split_sentences(std::string_view text) {
  std::vector<std::string> sentences;
  std::size_t start = 0;
  for (std::size_t i = 0; i < text.size(); ++i) {
    if (!is_delimiter(text[i])) continue;
    bool boundary = (i + 1 == text.size()) || is_space(text[i + 1]);
    if (!boundary) continue;
    std::string s = trim(text.substr(start, i + 1 - start));
    if (!s.empty()) sentences.push_back(std::move(s));
    start = i + 1;
  }
  if (start < text.size()) {
    std::string s = trim(text.substr(start));
    if (!s.empty()) sentences.push_back(std::move(s));
  }
  return sentences;
}

SentenceSplit first_sentence(std::string_view text) {
  if (is_blank(text)) throw Error(ErrorCode::EmptyText, "cannot take the first sentence of blank text");
  auto sentences = split_sentences(text);
  SentenceSplit out;
  out.head = sentences.front();
  // The head is a trimmed substring of text; locate it to slice the tail.
  std::size_t pos = text.find(out.head);
  out.tail = trim_left(text.substr(pos + out.head.size()));
  return out;
}

std::size_t token_count(std::string_view text) {
  std::size_t count = 0;
  bool in_token = false;
  for (char c : text) {
    if (is_ascii_punct(c)) continue;
    if (is_space(c)) {
      in_token = false;
    } else if (!in_token) {
      in_token = true;
      ++count;
    }
  }
  return count;
}

std::vector<std::string> normalized_tokens(std::string_view text) {
  std::vector<std::string> tokens;
  std::string current;
  for (char c : text) {
    if (is_ascii_punct(c)) continue;
    if (is_space(c)) {
      if (!current.empty()) tokens.push_back(std::move(current));
      current.clear();
      continue;
    }
    current.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
  }
  if (!current.empty()) tokens.push_back(std::move(current));
  return tokens;
}

std::string normalize_for_matching(std::string_view text) { return join(normalized_tokens(text), " "); }

bool iequals(std::string_view a, std::string_view b) noexcept {
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (std::tolower(static_cast<unsigned char>(a[i])) != std::tolower(static_cast<unsigned char>(b[i]))) {
      return false;
    }
  }
  return true;
}

std::size_t ifind(std::string_view haystack, std::string_view needle, std::size_t from) noexcept {
  if (needle.empty()) return from <= haystack.size() ? from : std::string_view::npos;
  if (haystack.size() < needle.size()) return std::string_view::npos;
  for (std::size_t i = from; i + needle.size() <= haystack.size(); ++i) {
    if (iequals(haystack.substr(i, needle.size()), needle)) return i;
  }
  return std::string_view::npos;
}

std::string join(const std::vector<std::string>& parts, std::string_view sep) {
  std::string out;
  for (std::size_t i = 0; i < parts.size(); ++i) {
    if (i > 0) out.append(sep);
    out.append(parts[i]);
  }
  return out;
}

}  // namespace vigc
