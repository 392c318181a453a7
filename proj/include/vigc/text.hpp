#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace vigc {

// Sentence boundary: one of '.', '!', '?' followed by whitespace or end of
// text. The delimiter stays with its sentence. Abbreviations are not special.
std::vector<std::string> split_sentences(std::string_view text);

struct SentenceSplit {
  std::string head;
  std::string tail;
};

/// Throws Error(EmptyText) for whitespace-only input.
SentenceSplit first_sentence(std::string_view text);

/// Number of whitespace-delimited runs after ASCII punctuation is removed.
std::size_t token_count(std::string_view text);

std::string trim(std::string_view text);
std::string trim_left(std::string_view text);
std::string trim_right(std::string_view text);
std::string collapse_whitespace(std::string_view text);
std::string to_lower(std::string_view text);
std::string strip_punctuation(std::string_view text);

/// Lowercased, punctuation-free tokens. Used for embedding, dedup keys and
/// prefix statistics.
std::vector<std::string> normalized_tokens(std::string_view text);

/// normalized_tokens joined by single spaces.
std::string normalize_for_matching(std::string_view text);

bool iequals(std::string_view a, std::string_view b) noexcept;

/// ASCII case-insensitive search; returns npos when absent.
std::size_t ifind(std::string_view haystack, std::string_view needle, std::size_t from = 0) noexcept;

bool is_blank(std::string_view text) noexcept;

std::string join(const std::vector<std::string>& parts, std::string_view sep);

}  // namespace vigc
