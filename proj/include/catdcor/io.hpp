#pragma once

// Reading categorical datasets: a CSV file with a header row plus a JSON
// metadata file that declares each analysed column's levels and encoding.
//
// Metadata layout:
//   {
//     "missing": ["NA", "."],            // optional extra missing tokens
//     "columns": [
//       {"name": "happy", "type": "ordinal", "encoding": "semicircle",
//        "levels": ["low", "mid", "high"]},
//       {"name": "region", "encoding": "custom", "levels": ["a", "b"],
//        "points": [[0.0], [1.0]]}
//     ]
//   }

#include <charconv>
#include <cstddef>
#include <fstream>
#include <istream>
#include <map>
#include <memory>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "json.hpp"

#include "catdcor/encodings.hpp"
#include "catdcor/error.hpp"
#include "catdcor/screening.hpp"

namespace catdcor {

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
  std::vector<std::size_t> lines;  // source line where each row starts
};

/// RFC 4180 style reader: commas, double-quoted fields with "" escapes,
/// quoted newlines, LF or CRLF line ends. Every row must match the header.
inline CsvTable read_csv(std::istream& in) {
  CsvTable table;
  std::vector<std::string> record;
  std::string field;
  std::size_t line = 1;
  std::size_t record_line = 1;
  bool quoted = false;       // inside quotes
  bool was_quoted = false;   // current field started with a quote
  bool after_quote = false;  // just closed a quoted field
  bool any = false;          // current record has content

  auto end_field = [&] {
    record.push_back(std::move(field));
    field.clear();
    was_quoted = false;
    after_quote = false;
  };
  auto end_record = [&] {
    end_field();
    if (table.header.empty()) {
      std::set<std::string> seen;
      for (const auto& name : record) {
        if (!seen.insert(name).second) {
          fail(ErrorCode::parse, "line " + std::to_string(record_line) + ": duplicate column '" +
                                     name + "'");
        }
      }
      table.header = std::move(record);
    } else {
      if (record.size() != table.header.size()) {
        fail(ErrorCode::parse, "line " + std::to_string(record_line) + ": expected " +
                                   std::to_string(table.header.size()) + " fields, found " +
                                   std::to_string(record.size()));
      }
      table.rows.push_back(std::move(record));
      table.lines.push_back(record_line);
    }
    record.clear();
    any = false;
  };

  char ch = 0;
  while (in.get(ch)) {
    if (quoted) {
      if (ch == '"') {
        if (in.peek() == '"') {
          in.get(ch);
          field.push_back('"');
        } else {
          quoted = false;
          after_quote = true;
        }
      } else {
        if (ch == '\n') ++line;
        field.push_back(ch);
      }
      continue;
    }
    if (ch == '\r' && in.peek() == '\n') continue;
    if (ch == '\n') {
      if (any || !record.empty() || !field.empty()) end_record();
      ++line;
      record_line = line;
      continue;
    }
    any = true;
    if (ch == ',') {
      end_field();
    } else if (ch == '"') {
      if (!field.empty() || was_quoted) {
        fail(ErrorCode::parse, "line " + std::to_string(line) + ": stray quote inside a field");
      }
      quoted = true;
      was_quoted = true;
    } else {
      if (after_quote) {
        fail(ErrorCode::parse, "line " + std::to_string(line) + ": text after a closing quote");
      }
      field.push_back(ch);
    }
  }
  if (quoted) fail(ErrorCode::parse, "line " + std::to_string(record_line) + ": unterminated quote");
  if (any || !record.empty() || !field.empty()) end_record();
  if (table.header.empty()) fail(ErrorCode::parse, "line 1: missing header row");
  return table;
}

inline CsvTable read_csv_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::io, "cannot open '" + path + "'");
  return read_csv(in);
}

struct ColumnSpec {
  std::string name;
  std::string type;  // free-form, e.g. nominal / ordinal
  Encoding encoding;
};

struct Metadata {
  std::vector<ColumnSpec> columns;
  std::set<std::string> missing{""};

  const ColumnSpec* find(std::string_view name) const {
    for (const auto& c : columns) {
      if (c.name == name) return &c;
    }
    return nullptr;
  }
};

inline Metadata parse_metadata(const nlohmann::json& doc) {
  using nlohmann::json;
  auto bad = [](const std::string& what) -> void { fail(ErrorCode::configuration, "metadata: " + what); };
  if (!doc.is_object() || !doc.contains("columns") || !doc["columns"].is_array()) {
    bad("expected an object with a \"columns\" array");
  }
  Metadata meta;
  if (doc.contains("missing")) {
    const auto& m = doc["missing"];
    if (m.is_string()) {
      meta.missing.insert(m.get<std::string>());
    } else if (m.is_array()) {
      for (const auto& token : m) {
        if (!token.is_string()) bad("\"missing\" entries must be strings");
        meta.missing.insert(token.get<std::string>());
      }
    } else {
      bad("\"missing\" must be a string or an array of strings");
    }
  }
  std::set<std::string> names;
  for (const auto& col : doc["columns"]) {
    if (!col.is_object() || !col.contains("name") || !col["name"].is_string()) {
      bad("every column needs a string \"name\"");
    }
    const auto name = col["name"].get<std::string>();
    if (!names.insert(name).second) bad("column '" + name + "' declared twice");
    if (!col.contains("levels") || !col["levels"].is_array()) {
      bad("column '" + name + "' needs a \"levels\" array");
    }
    std::vector<std::string> levels;
    for (const auto& level : col["levels"]) {
      if (level.is_string()) {
        levels.push_back(level.get<std::string>());
      } else if (level.is_number_integer()) {
        levels.push_back(std::to_string(level.get<long long>()));
      } else {
        bad("levels of column '" + name + "' must be strings or integers");
      }
    }
    const std::string enc_name = col.value("encoding", std::string("onehot"));
    const auto kind = parse_encoding_kind(enc_name);
    if (!kind) bad("column '" + name + "' has unknown encoding '" + enc_name + "'");
    std::string type = col.value("type", std::string());
    if (*kind == EncodingKind::custom) {
      if (!col.contains("points") || !col["points"].is_array()) {
        bad("custom encoding of column '" + name + "' needs \"points\"");
      }
      std::vector<Point> points;
      for (const auto& pt : col["points"]) {
        if (pt.is_number()) {
          points.push_back({pt.get<double>()});
        } else if (pt.is_array()) {
          Point p;
          for (const auto& v : pt) {
            if (!v.is_number()) bad("points of column '" + name + "' must be numeric");
            p.push_back(v.get<double>());
          }
          points.push_back(std::move(p));
        } else {
          bad("points of column '" + name + "' must be numbers or arrays");
        }
      }
      meta.columns.push_back({name, std::move(type), custom(std::move(levels), std::move(points))});
    } else {
      meta.columns.push_back({name, std::move(type), make_encoding(*kind, std::move(levels))});
    }
  }
  return meta;
}

inline Metadata read_metadata_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::io, "cannot open '" + path + "'");
  nlohmann::json doc;
  try {
    in >> doc;
  } catch (const nlohmann::json::parse_error& e) {
    fail(ErrorCode::parse, "metadata '" + path + "': " + e.what());
  }
  return parse_metadata(doc);
}

struct IngestResult {
  CategoricalDataset data;
  std::vector<Encoding> encodings;  // parallel to data columns
  std::size_t dropped_rows = 0;
};

/// Keeps the CSV columns declared in the metadata (in metadata order), drops
/// rows with a missing token in any of them, and maps labels to codes.
inline IngestResult ingest(const CsvTable& csv, const Metadata& meta) {
  std::vector<std::size_t> source;
  for (const auto& col : meta.columns) {
    std::size_t found = csv.header.size();
    for (std::size_t c = 0; c < csv.header.size(); ++c) {
      if (csv.header[c] == col.name) found = c;
    }
    if (found == csv.header.size()) {
      fail(ErrorCode::configuration, "metadata column '" + col.name + "' is not in the CSV header");
    }
    source.push_back(found);
  }
  IngestResult out;
  const std::size_t width = meta.columns.size();
  out.data.names.reserve(width);
  out.data.columns.assign(width, {});
  for (const auto& col : meta.columns) {
    out.data.names.push_back(col.name);
    out.data.levels.push_back(static_cast<int>(col.encoding.size()));
    out.encodings.push_back(col.encoding);
  }
  std::vector<std::map<std::string, int, std::less<>>> lookup(width);
  for (std::size_t c = 0; c < width; ++c) {
    const auto& labels = meta.columns[c].encoding.labels();
    for (std::size_t k = 0; k < labels.size(); ++k) lookup[c].emplace(labels[k], static_cast<int>(k));
  }
  for (std::size_t r = 0; r < csv.rows.size(); ++r) {
    const auto& row = csv.rows[r];
    bool missing = false;
    for (std::size_t c = 0; c < width && !missing; ++c) missing = meta.missing.count(row[source[c]]) > 0;
    if (missing) {
      ++out.dropped_rows;
      continue;
    }
    for (std::size_t c = 0; c < width; ++c) {
      const auto& label = row[source[c]];
      const auto it = lookup[c].find(label);
      if (it == lookup[c].end()) {
        fail(ErrorCode::label, "column '" + meta.columns[c].name + "', line " +
                                   std::to_string(csv.lines[r]) + ": unknown label '" + label + "'");
      }
      out.data.columns[c].push_back(it->second);
    }
  }
  return out;
}

inline IngestResult ingest_files(const std::string& csv_path, const std::string& metadata_path) {
  return ingest(read_csv_file(csv_path), read_metadata_file(metadata_path));
}

/// Shortest round-trip decimal form of a double.
inline std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

inline std::string csv_escape(std::string_view field) {
  if (field.find_first_of(",\"\r\n") == std::string_view::npos) return std::string(field);
  std::string out = "\"";
  for (char ch : field) {
    if (ch == '"') out += "\"\"";
    else out.push_back(ch);
  }
  out += '"';
  return out;
}

/// Writes coded data back out with labels, suitable for ingest().
inline void write_csv(std::ostream& out, const CategoricalDataset& data,
                      const std::vector<Encoding>& encodings) {
  for (std::size_t c = 0; c < data.cols(); ++c) out << (c ? "," : "") << csv_escape(data.names[c]);
  out << '\n';
  for (std::size_t r = 0; r < data.rows(); ++r) {
    for (std::size_t c = 0; c < data.cols(); ++c) {
      out << (c ? "," : "")
          << csv_escape(encodings[c].labels()[static_cast<std::size_t>(data.columns[c][r])]);
    }
    out << '\n';
  }
}

inline nlohmann::ordered_json metadata_json(const std::vector<std::string>& names,
                                            const std::vector<Encoding>& encodings) {
  nlohmann::ordered_json cols = nlohmann::ordered_json::array();
  for (std::size_t c = 0; c < names.size(); ++c) {
    nlohmann::ordered_json col;
    col["name"] = names[c];
    col["encoding"] = std::string(to_string(encodings[c].kind()));
    col["levels"] = encodings[c].labels();
    if (encodings[c].kind() == EncodingKind::custom) col["points"] = encodings[c].points();
    cols.push_back(std::move(col));
  }
  nlohmann::ordered_json doc;
  doc["columns"] = std::move(cols);
  return doc;
}

}  // namespace catdcor
