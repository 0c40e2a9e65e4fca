#pragma once

#include <algorithm>
#include <array>
#include <cstddef>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "comment_judge/corpus.hpp"
#include "comment_judge/text.hpp"

namespace comment_judge {

namespace detail {

inline bool is_word_byte(char c) noexcept {
  const auto u = static_cast<unsigned char>(c);
  return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') || c == '_' || u >= 0x80;
}

inline bool is_upper(char c) noexcept { return c >= 'A' && c <= 'Z'; }
inline bool is_lower_or_digit(char c) noexcept { return (c >= 'a' && c <= 'z') || (c >= '0' && c <= '9'); }

// Splits an identifier on underscores and camelCase boundaries
// ("parseHTTPHeader" -> parse, HTTP, Header).
inline std::vector<std::string_view> identifier_parts(std::string_view word) {
  std::vector<std::string_view> parts;
  std::size_t start = 0;
  const auto cut = [&](std::size_t end) {
    if (end > start) parts.push_back(word.substr(start, end - start));
    start = end;
  };
  for (std::size_t i = 0; i < word.size(); ++i) {
    if (word[i] == '_') {
      cut(i);
      start = i + 1;
      continue;
    }
    if (i == start) continue;
    const char prev = word[i - 1];
    const bool lower_to_upper = is_lower_or_digit(prev) && is_upper(word[i]);
    const bool acronym_end = is_upper(prev) && is_upper(word[i]) && i + 1 < word.size() &&
                             word[i + 1] >= 'a' && word[i + 1] <= 'z';
    if (lower_to_upper || acronym_end) cut(i);
  }
  cut(word.size());
  return parts;
}

}  // namespace detail

/// Lowercased word tokens. Identifiers made of several camelCase or
/// snake_case parts contribute the whole identifier followed by each part.
/// Tokens shorter than two bytes are dropped.
inline std::vector<std::string> tokenize(std::string_view input) {
  std::vector<std::string> tokens;
  std::size_t i = 0;
  while (i < input.size()) {
    if (!detail::is_word_byte(input[i])) {
      ++i;
      continue;
    }
    std::size_t j = i;
    while (j < input.size() && detail::is_word_byte(input[j])) ++j;
    const std::string_view word = input.substr(i, j - i);
    i = j;

    if (word.size() >= 2) tokens.push_back(text::to_lower(word));
    const auto parts = detail::identifier_parts(word);
    if (parts.size() > 1) {
      for (auto part : parts) {
        if (part.size() >= 2) tokens.push_back(text::to_lower(part));
      }
    }
  }
  return tokens;
}

/// Byte-level edit distance.
inline std::size_t levenshtein(std::string_view a, std::string_view b) {
  if (a.size() < b.size()) std::swap(a, b);
  std::vector<std::size_t> prev(b.size() + 1);
  std::vector<std::size_t> cur(b.size() + 1);
  for (std::size_t j = 0; j <= b.size(); ++j) prev[j] = j;
  for (std::size_t i = 1; i <= a.size(); ++i) {
    cur[0] = i;
    for (std::size_t j = 1; j <= b.size(); ++j) {
      const std::size_t subst = prev[j - 1] + (a[i - 1] == b[j - 1] ? 0 : 1);
      cur[j] = std::min({prev[j] + 1, cur[j - 1] + 1, subst});
    }
    std::swap(prev, cur);
  }
  return prev[b.size()];
}

inline constexpr std::size_t kLevenshteinCap = 1000;
inline constexpr double kCommentLengthScale = 200.0;
inline constexpr std::size_t kHandcraftedWidth = 5;

/// 1 - dist/max(len) over inputs truncated to 1000 bytes; two empty strings are identical.
inline double levenshtein_similarity(std::string_view a, std::string_view b) {
  a = a.substr(0, std::min(a.size(), kLevenshteinCap));
  b = b.substr(0, std::min(b.size(), kLevenshteinCap));
  const std::size_t longest = std::max(a.size(), b.size());
  if (longest == 0) return 1.0;
  return 1.0 - static_cast<double>(levenshtein(a, b)) / static_cast<double>(longest);
}

inline double jaccard(const std::set<std::string>& a, const std::set<std::string>& b) {
  if (a.empty() && b.empty()) return 0.0;
  std::size_t common = 0;
  for (const auto& t : a) common += b.contains(t) ? 1 : 0;
  return static_cast<double>(common) / static_cast<double>(a.size() + b.size() - common);
}

inline bool is_c_keyword(std::string_view w) {
  static constexpr std::array<std::string_view, 44> kKeywords{
      "auto",     "break",    "case",     "char",   "const",    "continue", "default",  "do",
      "double",   "else",     "enum",     "extern", "float",    "for",      "goto",     "if",
      "inline",   "int",      "long",     "register", "restrict", "return", "short",    "signed",
      "sizeof",   "static",   "struct",   "switch", "typedef",  "union",    "unsigned", "void",
      "volatile", "while",    "_Bool",    "_Complex", "_Imaginary", "_Alignas", "_Alignof", "_Atomic",
      "_Generic", "_Noreturn", "_Static_assert", "_Thread_local"};
  return std::find(kKeywords.begin(), kKeywords.end(), w) != kKeywords.end();
}

/// Lowercased C identifiers (keywords excluded) appearing in `code`.
inline std::set<std::string> code_identifiers(std::string_view code) {
  std::set<std::string> ids;
  std::size_t i = 0;
  while (i < code.size()) {
    const char c = code[i];
    const bool starts = (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || c == '_';
    if (c >= '0' && c <= '9') {
      // Numeric literals are skipped whole so "0x1f" does not yield "x1f".
      while (i < code.size() && detail::is_word_byte(code[i])) ++i;
      continue;
    }
    if (!starts) {
      ++i;
      continue;
    }
    std::size_t j = i;
    while (j < code.size() && detail::is_word_byte(code[j])) ++j;
    const auto word = code.substr(i, j - i);
    if (!is_c_keyword(word)) ids.insert(text::to_lower(word));
    i = j;
  }
  return ids;
}

/// The five handcrafted features, in order:
/// comment token count, comment length / 200 (capped at 1), Jaccard overlap of
/// comment and code token sets, Levenshtein similarity of the raw strings,
/// fraction of distinct comment tokens that name an identifier in the code.
inline std::array<double, kHandcraftedWidth> handcrafted(const CodeCommentPair& pair) {
  const auto comment_tokens = tokenize(pair.comment_text);
  const std::set<std::string> comment_set(comment_tokens.begin(), comment_tokens.end());
  const auto code_tokens = tokenize(pair.code_context);
  const std::set<std::string> code_set(code_tokens.begin(), code_tokens.end());

  double identifier_fraction = 0.0;
  if (!comment_set.empty()) {
    const auto ids = code_identifiers(pair.code_context);
    std::size_t hits = 0;
    for (const auto& t : comment_set) hits += ids.contains(t) ? 1 : 0;
    identifier_fraction = static_cast<double>(hits) / static_cast<double>(comment_set.size());
  }

  return {
      static_cast<double>(comment_tokens.size()),
      std::min(1.0, static_cast<double>(pair.comment_text.size()) / kCommentLengthScale),
      code_set.empty() ? 0.0 : jaccard(comment_set, code_set),
      levenshtein_similarity(pair.comment_text, pair.code_context),
      identifier_fraction,
  };
}

}  // namespace comment_judge
