#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "comment_judge/error.hpp"

namespace comment_judge::csv {

// Dialect: comma separator, double-quote quoting, quotes escaped by doubling,
// records end at LF or CRLF outside quotes.

struct Record {
  std::size_t line = 0;  // 1-based physical line where the record starts
  std::vector<std::string> fields;
};

inline std::vector<Record> parse(std::string_view input) {
  if (input.starts_with("\xEF\xBB\xBF")) input.remove_prefix(3);
  std::vector<Record> records;
  Record current;
  std::string field;
  bool in_quotes = false;
  bool field_was_quoted = false;
  bool record_open = false;
  std::size_t line = 1;
  current.line = 1;

  const auto end_field = [&] {
    current.fields.push_back(std::move(field));
    field.clear();
    field_was_quoted = false;
  };
  const auto end_record = [&] {
    end_field();
    records.push_back(std::move(current));
    current = Record{};
    record_open = false;
  };

  for (std::size_t i = 0; i < input.size(); ++i) {
    const char c = input[i];
    if (!record_open) {
      current.line = line;
      record_open = true;
    }
    if (in_quotes) {
      if (c == '"') {
        if (i + 1 < input.size() && input[i + 1] == '"') {
          field.push_back('"');
          ++i;
        } else {
          in_quotes = false;
        }
      } else {
        if (c == '\n') ++line;
        field.push_back(c);
      }
      continue;
    }
    switch (c) {
      case '"':
        if (!field.empty() || field_was_quoted) {
          throw DataError("line " + std::to_string(line) + ": stray quote inside unquoted field");
        }
        in_quotes = true;
        field_was_quoted = true;
        break;
      case ',':
        end_field();
        break;
      case '\r':
        if (i + 1 < input.size() && input[i + 1] == '\n') break;
        field.push_back(c);
        break;
      case '\n':
        ++line;
        end_record();
        break;
      default:
        if (field_was_quoted) {
          throw DataError("line " + std::to_string(line) + ": text after closing quote");
        }
        field.push_back(c);
    }
  }
  if (in_quotes) throw DataError("line " + std::to_string(current.line) + ": unterminated quoted field");
  if (record_open) end_record();
  return records;
}

inline bool needs_quotes(std::string_view field) noexcept {
  return field.find_first_of(",\"\r\n") != std::string_view::npos;
}

inline void append_field(std::string& out, std::string_view field) {
  if (!needs_quotes(field)) {
    out.append(field);
    return;
  }
  out.push_back('"');
  for (char c : field) {
    if (c == '"') out.push_back('"');
    out.push_back(c);
  }
  out.push_back('"');
}

inline void append_record(std::string& out, const std::vector<std::string_view>& fields) {
  for (std::size_t i = 0; i < fields.size(); ++i) {
    if (i) out.push_back(',');
    append_field(out, fields[i]);
  }
  out.push_back('\n');
}

}  // namespace comment_judge::csv
