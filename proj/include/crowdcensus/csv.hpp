#pragma once

#include <cstddef>
#include <istream>
#include <ostream>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace crowdcensus::csv {

/// RFC 4180 table: quoted fields may hold commas, quotes ("") and newlines.
struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
  std::vector<std::size_t> line_numbers;  // 1-based source line of each row

  /// Index of `name` in the header, or throws MissingColumn.
  std::size_t column(std::string_view name) const;
  bool has_column(std::string_view name) const;
};

Table parse(std::string_view text);
Table read_file(const std::string& path);

/// A row accessor bound to a table's header.
class RowView {
 public:
  RowView(const Table& table, std::size_t row) : table_(table), row_(row) {}
  const std::string& operator[](std::string_view column) const;
  /// Empty string when the column is absent from the header.
  std::string get_or_empty(std::string_view column) const;
  std::size_t line() const { return table_.line_numbers[row_]; }

 private:
  const Table& table_;
  std::size_t row_;
};

std::string escape(std::string_view field);
void write_row(std::ostream& os, const std::vector<std::string>& fields);
std::string to_string(const Table& table);

}  // namespace crowdcensus::csv
