#include "lotus/csv.hpp"

#include <fstream>
#include <sstream>

#include "lotus/errors.hpp"

namespace lotus::csv {

namespace {

std::string record_context(std::size_t record) {
  return "CSV record " + std::to_string(record);
}

}  // namespace

std::vector<Row> parse_document(std::string_view text) {
  std::vector<Row> rows;
  Row row;
  std::string field;
  bool in_quotes = false;
  bool field_was_quoted = false;
  std::size_t record = 1;

  auto end_field = [&] {
    row.push_back(std::move(field));
    field.clear();
    field_was_quoted = false;
  };
  auto end_record = [&] {
    end_field();
    rows.push_back(std::move(row));
    row.clear();
    ++record;
  };

  for (std::size_t i = 0; i < text.size(); ++i) {
    char c = text[i];
    if (in_quotes) {
      if (c == '"') {
        if (i + 1 < text.size() && text[i + 1] == '"') {
          field.push_back('"');
          ++i;
        } else {
          in_quotes = false;
        }
      } else {
        field.push_back(c);
      }
      continue;
    }
    switch (c) {
      case '"':
        if (!field.empty() || field_was_quoted) {
          throw SchemaError(record_context(record) +
                            ": quote character inside unquoted field");
        }
        in_quotes = true;
        field_was_quoted = true;
        break;
      case ',':
        end_field();
        break;
      case '\r':
        if (i + 1 < text.size() && text[i + 1] == '\n') {
          end_record();
          ++i;
        } else {
          field.push_back(c);  // lone CR is field content
        }
        break;
      case '\n':
        end_record();
        break;
      default:
        if (field_was_quoted) {
          throw SchemaError(record_context(record) +
                            ": content after closing quote");
        }
        field.push_back(c);
    }
  }
  if (in_quotes) {
    throw SchemaError(record_context(record) + ": unterminated quoted field");
  }
  // Final record without a trailing newline.
  if (!field.empty() || field_was_quoted || !row.empty()) {
    end_record();
  }
  return rows;
}

std::vector<Row> parse_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw IoError("cannot open file: " + path.string());
  }
  std::ostringstream buffer;
  buffer << in.rdbuf();
  if (in.bad()) {
    throw IoError("failed reading file: " + path.string());
  }
  return parse_document(buffer.str());
}

std::string escape_field(std::string_view field) {
  bool needs_quotes = field.find_first_of(",\"\r\n") != std::string_view::npos;
  if (!needs_quotes) return std::string(field);
  std::string out;
  out.reserve(field.size() + 2);
  out.push_back('"');
  for (char c : field) {
    if (c == '"') out.push_back('"');
    out.push_back(c);
  }
  out.push_back('"');
  return out;
}

std::string format_row(const Row& row) {
  std::string out;
  for (std::size_t i = 0; i < row.size(); ++i) {
    if (i > 0) out.push_back(',');
    out += escape_field(row[i]);
  }
  out.push_back('\n');
  return out;
}

}  // namespace lotus::csv
