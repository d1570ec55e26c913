#include "claimnorm/csv.hpp"

#include <ostream>

#include "claimnorm/error.hpp"

namespace claimnorm::csv {

std::vector<Row> parse(std::string_view text) {
  if (text.substr(0, 3) == "\xEF\xBB\xBF") text.remove_prefix(3);

  std::vector<Row> rows;
  Row row;
  std::string field;
  std::size_t line = 1;
  row.line = 1;
  bool in_quotes = false;
  bool after_quote = false;  // just closed a quoted field
  bool row_has_content = false;

  auto end_field = [&] {
    row.fields.push_back(std::move(field));
    field.clear();
    after_quote = false;
  };
  auto end_row = [&] {
    end_field();
    rows.push_back(std::move(row));
    row = Row{};
    row_has_content = false;
  };

  for (std::size_t i = 0; i < text.size(); ++i) {
    const char c = text[i];
    if (in_quotes) {
      if (c == '"') {
        if (i + 1 < text.size() && text[i + 1] == '"') {
          field.push_back('"');
          ++i;
        } else {
          in_quotes = false;
          after_quote = true;
        }
      } else {
        if (c == '\n') ++line;
        field.push_back(c);
      }
      continue;
    }
    if (c == ',') {
      end_field();
      row_has_content = true;
    } else if (c == '\r' || c == '\n') {
      if (c == '\r' && i + 1 < text.size() && text[i + 1] == '\n') ++i;
      if (row_has_content || !field.empty() || !row.fields.empty() || after_quote) {
        end_row();
      }
      ++line;
      row.line = line;
    } else if (after_quote) {
      throw Error(Errc::IoError,
                  "malformed CSV at line " + std::to_string(line) + ": text after closing quote");
    } else if (c == '"' && field.empty()) {
      in_quotes = true;
      row_has_content = true;
    } else {
      field.push_back(c);
      row_has_content = true;
    }
  }
  if (in_quotes) {
    throw Error(Errc::IoError,
                "malformed CSV: unterminated quoted field starting on line " + std::to_string(row.line));
  }
  if (row_has_content || !field.empty() || !row.fields.empty() || after_quote) end_row();
  return rows;
}

std::string quote_if_needed(std::string_view field) {
  bool needs = field.find_first_of(",\"\r\n") != std::string_view::npos;
  if (!field.empty() && (field.front() == ' ' || field.back() == ' ')) needs = true;
  if (!needs) return std::string(field);
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

void write_row(std::ostream& out, const std::vector<std::string>& fields) {
  for (std::size_t i = 0; i < fields.size(); ++i) {
    if (i) out << ',';
    // A lone empty field would otherwise serialize as a blank line.
    if (fields.size() == 1 && fields[i].empty()) {
      out << "\"\"";
    } else {
      out << quote_if_needed(fields[i]);
    }
  }
  out << '\n';
}

}  // namespace claimnorm::csv
