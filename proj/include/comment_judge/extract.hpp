#pragma once

#include <algorithm>
#include <concepts>
#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "comment_judge/corpus.hpp"
#include "comment_judge/text.hpp"

namespace comment_judge {

/// Anything that hands out one byte at a time and signals end of input.
template <typename S>
concept ByteSource = requires(S s) {
  { s.next() } -> std::same_as<std::optional<char>>;
};

class StringByteSource {
 public:
  explicit StringByteSource(std::string_view text) noexcept : text_(text) {}
  std::optional<char> next() noexcept {
    if (pos_ >= text_.size()) return std::nullopt;
    return text_[pos_++];
  }

 private:
  std::string_view text_;
  std::size_t pos_ = 0;
};

enum class CommentKind { Block, Line };

struct CommentSpan {
  CommentKind kind = CommentKind::Block;
  std::size_t begin = 0;  // byte offset of the opening delimiter
  std::size_t end = 0;    // one past the last comment byte
  std::size_t line = 1;   // 1-based line of `begin`
  std::string raw;        // source bytes [begin, end), delimiters included
};

struct ExtractionError {
  std::size_t line = 0;
  std::string message;
};

struct CommentScan {
  std::vector<CommentSpan> comments;
  // Same length as the source; comment bytes are blanked to spaces, newlines kept.
  std::string code_only;
  std::optional<ExtractionError> error;
};

/// Single pass over a C translation unit, recognizing string and character
/// literals so that comment markers inside them are ignored. Each byte is
/// pulled from `source` exactly once.
template <ByteSource S>
CommentScan scan_comments(S& source) {
  enum class State { Code, String, Char, Block, Line };
  CommentScan out;
  State state = State::Code;
  std::optional<char> lookahead;
  std::size_t pos = 0;  // offset of the next byte to be returned by get()
  std::size_t line = 1;
  CommentSpan current;

  const auto get = [&]() -> std::optional<char> {
    std::optional<char> c;
    if (lookahead) {
      c = lookahead;
      lookahead.reset();
    } else {
      c = source.next();
    }
    if (c) ++pos;
    return c;
  };
  const auto unget = [&](char c) {
    lookahead = c;
    --pos;
  };
  const auto emit_code = [&](char c) {
    out.code_only.push_back(c);
    if (c == '\n') ++line;
  };
  const auto emit_comment = [&](char c) {
    current.raw.push_back(c);
    out.code_only.push_back(c == '\n' ? '\n' : ' ');
    if (c == '\n') ++line;
  };
  const auto close_comment = [&](std::size_t end) {
    current.end = end;
    out.comments.push_back(std::move(current));
    current = CommentSpan{};
    state = State::Code;
  };

  while (auto next = get()) {
    const char c = *next;
    switch (state) {
      case State::Code: {
        if (c == '/') {
          auto follow = get();
          if (follow && (*follow == '*' || *follow == '/')) {
            current = CommentSpan{};
            current.kind = *follow == '*' ? CommentKind::Block : CommentKind::Line;
            current.begin = pos - 2;
            current.line = line;
            emit_comment('/');
            emit_comment(*follow);
            state = *follow == '*' ? State::Block : State::Line;
            break;
          }
          emit_code(c);
          if (follow) unget(*follow);
          break;
        }
        if (c == '"') state = State::String;
        if (c == '\'') state = State::Char;
        emit_code(c);
        break;
      }
      case State::String:
      case State::Char: {
        const char quote = state == State::String ? '"' : '\'';
        emit_code(c);
        if (c == '\\') {
          if (auto escaped = get()) emit_code(*escaped);
        } else if (c == quote || c == '\n') {
          state = State::Code;
        }
        break;
      }
      case State::Block: {
        emit_comment(c);
        if (c == '*') {
          auto follow = get();
          if (follow && *follow == '/') {
            emit_comment('/');
            close_comment(pos);
          } else if (follow) {
            unget(*follow);
          }
        }
        break;
      }
      case State::Line: {
        if (c == '\n') {
          close_comment(pos - 1);
          emit_code(c);
          break;
        }
        emit_comment(c);
        if (c == '\\') {
          // Backslash-newline continues a line comment.
          auto follow = get();
          if (follow && *follow == '\n') {
            emit_comment('\n');
          } else if (follow) {
            unget(*follow);
          }
        }
        break;
      }
    }
  }

  if (state == State::Line) close_comment(pos);
  if (state == State::Block) {
    out.error = ExtractionError{current.line, "unterminated block comment starting at line " +
                                                  std::to_string(current.line)};
  }
  return out;
}

inline CommentScan scan_comments(std::string_view source) {
  StringByteSource s(source);
  return scan_comments(s);
}

namespace detail {

inline std::vector<std::string_view> split_lines(std::string_view s) {
  std::vector<std::string_view> lines;
  std::size_t start = 0;
  while (true) {
    const std::size_t nl = s.find('\n', start);
    if (nl == std::string_view::npos) {
      lines.push_back(s.substr(start));
      return lines;
    }
    lines.push_back(s.substr(start, nl - start));
    start = nl + 1;
  }
}

inline std::string join_trimmed(const std::vector<std::string>& lines) {
  std::size_t b = 0;
  std::size_t e = lines.size();
  while (b < e && lines[b].empty()) ++b;
  while (e > b && lines[e - 1].empty()) --e;
  std::string out;
  for (std::size_t i = b; i < e; ++i) {
    if (i > b) out.push_back('\n');
    out += lines[i];
  }
  return out;
}

inline std::string_view strip_leading(std::string_view s, std::string_view chars) {
  while (!s.empty() && chars.find(s.front()) != std::string_view::npos) s.remove_prefix(1);
  return s;
}

// Comment body with delimiters and decorative leading stars removed.
inline std::string comment_body(const CommentSpan& span) {
  std::vector<std::string> lines;
  if (span.kind == CommentKind::Block) {
    std::string_view body(span.raw);
    body.remove_prefix(2);
    if (body.ends_with("*/")) body.remove_suffix(2);
    body = strip_leading(body, "*!");
    for (auto l : split_lines(body)) {
      l = text::trim(l);
      if (l.starts_with('*')) l = text::trim(strip_leading(l, "*"));
      lines.emplace_back(l);
    }
  } else {
    for (auto l : split_lines(span.raw)) {
      l = text::trim(l);
      if (l.starts_with("//")) l = strip_leading(l.substr(2), "/!");
      if (l.ends_with('\\')) l.remove_suffix(1);
      lines.emplace_back(text::trim(l));
    }
  }
  return join_trimmed(lines);
}

}  // namespace detail

struct ExtractionResult {
  std::vector<CodeCommentPair> pairs;
  std::optional<ExtractionError> error;
};

/// One unlabeled pair per comment group. Adjacent whole-line `//` comments
/// merge into one group; a comment trailing code takes that line as context,
/// otherwise the next `context_lines` lines holding code. A comment starting
/// at byte 0 is treated as a file header and skipped. Pair ids are
/// `<id_prefix>:<line>`.
inline ExtractionResult extract_pairs_from_c_source(std::string_view source, std::size_t context_lines,
                                                    std::string_view id_prefix = "extracted") {
  if (context_lines < 1) throw UsageError("context_lines must be at least 1");
  ExtractionResult result;
  CommentScan scan = scan_comments(source);
  result.error = std::move(scan.error);
  const std::string_view code(scan.code_only);

  std::vector<std::size_t> line_starts{0};
  for (std::size_t i = 0; i < code.size(); ++i) {
    if (code[i] == '\n') line_starts.push_back(i + 1);
  }
  const auto line_text = [&](std::size_t line) {  // 1-based, without newline
    const std::size_t b = line_starts[line - 1];
    const std::size_t e = line < line_starts.size() ? line_starts[line] - 1 : code.size();
    return code.substr(b, e - b);
  };
  const auto line_of = [&](std::size_t offset) {
    return static_cast<std::size_t>(std::upper_bound(line_starts.begin(), line_starts.end(), offset) -
                                    line_starts.begin());
  };
  const auto trails_code = [&](const CommentSpan& s) {
    const std::size_t b = line_starts[s.line - 1];
    return !text::trim(code.substr(b, s.begin - b)).empty();
  };

  const auto& comments = scan.comments;
  for (std::size_t i = 0; i < comments.size();) {
    // Group adjacent whole-line `//` comments.
    std::size_t j = i + 1;
    const bool trailing = trails_code(comments[i]);
    if (comments[i].kind == CommentKind::Line && !trailing) {
      while (j < comments.size() && comments[j].kind == CommentKind::Line &&
             comments[j].line == line_of(comments[j - 1].end - 1) + 1 && !trails_code(comments[j])) {
        ++j;
      }
    }
    const CommentSpan& first = comments[i];
    const CommentSpan& last = comments[j - 1];

    std::string body;
    for (std::size_t k = i; k < j; ++k) {
      if (k > i) body.push_back('\n');
      body += detail::comment_body(comments[k]);
    }
    body = std::string(text::trim(body));

    if (first.begin != 0 && !body.empty()) {
      std::vector<std::string_view> context;
      if (trailing) {
        context.push_back(text::trim(line_text(first.line)));
      } else {
        const std::size_t end_line = line_of(last.end - 1);
        const std::size_t line_end =
            end_line < line_starts.size() ? line_starts[end_line] - 1 : code.size();
        const auto rest = text::trim(code.substr(last.end, line_end - std::min(line_end, last.end)));
        if (!rest.empty()) context.push_back(rest);
        for (std::size_t l = end_line + 1; l <= line_starts.size() && context.size() < context_lines; ++l) {
          const auto t = text::rtrim(line_text(l));
          if (!text::trim(t).empty()) context.push_back(t);
        }
      }
      CodeCommentPair p;
      p.id = std::string(id_prefix) + ":" + std::to_string(first.line);
      p.comment_text = std::move(body);
      for (std::size_t k = 0; k < context.size(); ++k) {
        if (k) p.code_context.push_back('\n');
        p.code_context.append(context[k]);
      }
      p.source = Source::Extracted;
      result.pairs.push_back(std::move(p));
    }
    i = j;
  }
  return result;
}

}  // namespace comment_judge
