#pragma once

#include <cstddef>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

// RFC 4180 reader and writer. Both CRLF and LF record separators are
// accepted; quoted fields may span lines.
namespace claimnorm::csv {

struct Row {
  std::vector<std::string> fields;
  std::size_t line = 0;  // 1-based line on which the record starts
};

// Parses the whole document. A leading UTF-8 byte order mark is skipped.
// Throws Error(IoError) on an unterminated quoted field or on stray
// characters after a closing quote.
std::vector<Row> parse(std::string_view text);

void write_row(std::ostream& out, const std::vector<std::string>& fields);

std::string quote_if_needed(std::string_view field);

}  // namespace claimnorm::csv
