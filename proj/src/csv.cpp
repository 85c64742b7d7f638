#include "crowdcensus/csv.hpp"

#include <fstream>
#include <sstream>

#include "crowdcensus/error.hpp"

namespace crowdcensus::csv {

std::size_t Table::column(std::string_view name) const {
  for (std::size_t i = 0; i < header.size(); ++i) {
    if (header[i] == name) return i;
  }
  throw MissingColumn(std::string(name));
}

bool Table::has_column(std::string_view name) const {
  for (const auto& h : header) {
    if (h == name) return true;
  }
  return false;
}

Table parse(std::string_view text) {
  // Strip a UTF-8 byte order mark.
  if (text.size() >= 3 && text.substr(0, 3) == "\xEF\xBB\xBF") text.remove_prefix(3);

  Table table;
  std::vector<std::string> record;
  std::string field;
  bool in_quotes = false;
  bool field_started = false;
  std::size_t line = 1;
  std::size_t record_line = 1;

  auto end_field = [&] {
    record.push_back(std::move(field));
    field.clear();
    field_started = false;
  };
  auto end_record = [&] {
    end_field();
    // A lone empty field is a blank line.
    bool blank = record.size() == 1 && record[0].empty();
    if (!blank) {
      if (table.header.empty()) {
        table.header = std::move(record);
      } else {
        if (record.size() != table.header.size()) {
          throw MalformedRow("line " + std::to_string(record_line) + ": expected " +
                             std::to_string(table.header.size()) + " fields, got " +
                             std::to_string(record.size()));
        }
        table.rows.push_back(std::move(record));
        table.line_numbers.push_back(record_line);
      }
    }
    record.clear();
    record_line = line;
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
        if (c == '\n') ++line;
        field.push_back(c);
      }
      continue;
    }
    switch (c) {
      case '"':
        if (field_started || !field.empty()) {
          throw MalformedRow("line " + std::to_string(line) + ": stray quote");
        }
        in_quotes = true;
        field_started = true;
        break;
      case ',':
        end_field();
        break;
      case '\r':
        break;
      case '\n':
        ++line;
        end_record();
        break;
      default:
        field.push_back(c);
    }
  }
  if (in_quotes) throw MalformedRow("line " + std::to_string(record_line) + ": unterminated quote");
  if (!field.empty() || field_started || !record.empty()) end_record();
  return table;
}

Table read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InvalidInput("cannot open '" + path + "'");
  std::stringstream buffer;
  buffer << in.rdbuf();
  return parse(buffer.str());
}

const std::string& RowView::operator[](std::string_view column) const {
  return table_.rows[row_][table_.column(column)];
}

std::string RowView::get_or_empty(std::string_view column) const {
  if (!table_.has_column(column)) return {};
  return (*this)[column];
}

std::string escape(std::string_view field) {
  bool needs_quotes = field.find_first_of(",\"\n\r") != std::string_view::npos;
  if (!needs_quotes) return std::string(field);
  std::string out = "\"";
  for (char c : field) {
    if (c == '"') out.push_back('"');
    out.push_back(c);
  }
  out.push_back('"');
  return out;
}

void write_row(std::ostream& os, const std::vector<std::string>& fields) {
  for (std::size_t i = 0; i < fields.size(); ++i) {
    if (i) os << ',';
    os << escape(fields[i]);
  }
  os << '\n';
}

std::string to_string(const Table& table) {
  std::ostringstream os;
  write_row(os, table.header);
  for (const auto& row : table.rows) write_row(os, row);
  return os.str();
}

}  // namespace crowdcensus::csv
