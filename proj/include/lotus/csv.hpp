#pragma once

#include <filesystem>
#include <string>
#include <vector>

namespace lotus::csv {

// RFC-4180 CSV, UTF-8, LF or CRLF record ends. Quoted fields may contain
// commas, quotes (doubled) and line breaks; everything is preserved
// byte-exact apart from the unescaping itself.
using Row = std::vector<std::string>;

// Parses an entire document. Throws SchemaError on malformed quoting
// (stray quote inside an unquoted field, unterminated quote at EOF),
// reporting the 1-based record number.
std::vector<Row> parse_document(std::string_view text);

// Reads and parses a file. Throws IoError if it cannot be read.
std::vector<Row> parse_file(const std::filesystem::path& path);

// Minimal quoting: a field is quoted only when it contains a comma, a
// quote, CR or LF.
std::string escape_field(std::string_view field);

std::string format_row(const Row& row);

}  // namespace lotus::csv
