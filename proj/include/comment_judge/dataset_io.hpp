#pragma once

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <string_view>
#include <unordered_set>

#include <nlohmann/json.hpp>

#include "comment_judge/corpus.hpp"
#include "comment_judge/csv.hpp"
#include "comment_judge/error.hpp"

namespace comment_judge {

enum class DatasetFormat { Csv, Jsonl };

inline std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string() + " for reading");
  std::ostringstream ss;
  ss << in.rdbuf();
  if (in.bad()) throw IoError("error reading " + path.string());
  return std::move(ss).str();
}

inline void write_file(const std::filesystem::path& path, std::string_view content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out.write(content.data(), static_cast<std::streamsize>(content.size()));
  out.flush();
  if (!out) throw IoError("error writing " + path.string());
}

/// ".csv" selects CSV, everything else JSONL.
inline DatasetFormat format_from_path(const std::filesystem::path& path) {
  return path.extension() == ".csv" ? DatasetFormat::Csv : DatasetFormat::Jsonl;
}

inline std::optional<DatasetFormat> parse_format(std::string_view s) {
  if (s == "csv") return DatasetFormat::Csv;
  if (s == "jsonl") return DatasetFormat::Jsonl;
  return std::nullopt;
}

namespace detail {

inline constexpr std::string_view kCsvHeader = "id,comment,code,label,source,split";

template <typename E, typename Parse>
std::optional<E> parse_enum_field(std::string_view value, Parse parse, std::string_view what,
                                  const std::string& where) {
  if (value.empty()) return std::nullopt;
  auto v = parse(value);
  if (!v) throw DataError(where + ": unknown " + std::string(what) + " \"" + std::string(value) + "\"");
  return v;
}

inline CodeCommentPair make_pair(std::string id, std::string comment, std::string code,
                                 std::string_view label, std::string_view source, std::string_view split,
                                 const std::string& where) {
  CodeCommentPair p;
  p.id = std::move(id);
  p.comment_text = std::move(comment);
  p.code_context = std::move(code);
  p.label = parse_enum_field<Label>(label, parse_label, "label", where);
  if (source.empty()) {
    p.source = Source::Seed;
  } else if (auto s = parse_source(source)) {
    p.source = *s;
  } else {
    throw DataError(where + ": unknown source \"" + std::string(source) + "\"");
  }
  p.split = parse_enum_field<Split>(split, parse_split, "split", where);
  validate_pair(p, where);
  return p;
}

inline void check_unique(std::unordered_set<std::string>& ids, const CodeCommentPair& p,
                         const std::string& where) {
  if (!ids.insert(p.id).second) throw DataError(where + ": duplicate id \"" + p.id + "\"");
}

inline Dataset parse_csv_dataset(std::string_view content) {
  const auto records = csv::parse(content);
  if (records.empty()) throw DataError("missing CSV header (expected " + std::string(kCsvHeader) + ")");
  const auto& header = records.front().fields;
  const std::vector<std::string> expected{"id", "comment", "code", "label", "source", "split"};
  if (header != expected) throw DataError("bad CSV header (expected " + std::string(kCsvHeader) + ")");

  Dataset d;
  std::unordered_set<std::string> ids;
  for (std::size_t r = 1; r < records.size(); ++r) {
    const auto& rec = records[r];
    const std::string where = "row " + std::to_string(r) + " (line " + std::to_string(rec.line) + ")";
    if (rec.fields.size() == 1 && rec.fields[0].empty()) continue;
    if (rec.fields.size() != expected.size()) {
      throw DataError(where + ": expected 6 fields, found " + std::to_string(rec.fields.size()));
    }
    auto p = make_pair(rec.fields[0], rec.fields[1], rec.fields[2], rec.fields[3], rec.fields[4],
                       rec.fields[5], where);
    check_unique(ids, p, where);
    d.pairs.push_back(std::move(p));
  }
  return d;
}

inline Dataset parse_jsonl_dataset(std::string_view content) {
  Dataset d;
  std::unordered_set<std::string> ids;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos <= content.size()) {
    std::size_t nl = content.find('\n', pos);
    if (nl == std::string_view::npos) nl = content.size();
    std::string_view line = content.substr(pos, nl - pos);
    pos = nl + 1;
    ++line_no;
    if (text::trim(line).empty()) continue;
    const std::string where = "row " + std::to_string(line_no);
    nlohmann::json obj;
    try {
      obj = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw DataError(where + ": malformed JSON: " + e.what());
    }
    if (!obj.is_object()) throw DataError(where + ": expected a JSON object");
    const auto str = [&](const char* key, bool required) -> std::string {
      auto it = obj.find(key);
      if (it == obj.end() || it->is_null()) {
        if (required) throw DataError(where + ": missing \"" + key + "\"");
        return {};
      }
      if (!it->is_string()) throw DataError(where + ": \"" + key + "\" must be a string");
      return it->get<std::string>();
    };
    auto p = make_pair(str("id", true), str("comment", true), str("code", false), str("label", false),
                       str("source", false), str("split", false), where);
    check_unique(ids, p, where);
    d.pairs.push_back(std::move(p));
  }
  return d;
}

}  // namespace detail

inline Dataset parse_dataset(std::string_view content, DatasetFormat format) {
  Dataset d = format == DatasetFormat::Csv ? detail::parse_csv_dataset(content)
                                           : detail::parse_jsonl_dataset(content);
  validate(d);
  return d;
}

/// Loads a dataset; errors name the offending row.
inline Dataset load_dataset(const std::filesystem::path& path, DatasetFormat format) {
  return parse_dataset(read_file(path), format);
}

inline Dataset load_dataset(const std::filesystem::path& path) {
  return load_dataset(path, format_from_path(path));
}

inline nlohmann::json to_json(const CodeCommentPair& p) {
  nlohmann::json j;
  j["id"] = p.id;
  j["comment"] = p.comment_text;
  j["code"] = p.code_context;
  j["label"] = p.label ? nlohmann::json(std::string(to_string(*p.label))) : nlohmann::json(nullptr);
  j["source"] = std::string(to_string(p.source));
  j["split"] = p.split ? nlohmann::json(std::string(to_string(*p.split))) : nlohmann::json(nullptr);
  return j;
}

inline std::string serialize_dataset(const Dataset& d, DatasetFormat format) {
  std::string out;
  if (format == DatasetFormat::Csv) {
    out.append(detail::kCsvHeader);
    out.push_back('\n');
    for (const auto& p : d.pairs) {
      csv::append_record(out, {p.id, p.comment_text, p.code_context,
                               p.label ? to_string(*p.label) : std::string_view{}, to_string(p.source),
                               p.split ? to_string(*p.split) : std::string_view{}});
    }
    return out;
  }
  for (const auto& p : d.pairs) {
    out += to_json(p).dump(-1, ' ', false, nlohmann::json::error_handler_t::strict);
    out.push_back('\n');
  }
  return out;
}

inline void save_dataset(const Dataset& d, const std::filesystem::path& path, DatasetFormat format) {
  write_file(path, serialize_dataset(d, format));
}

inline void save_dataset(const Dataset& d, const std::filesystem::path& path) {
  save_dataset(d, path, format_from_path(path));
}

}  // namespace comment_judge
