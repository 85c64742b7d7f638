#include "crowdcensus/region_map.hpp"

#include <cctype>

#include "crowdcensus/csv.hpp"
#include "crowdcensus/error.hpp"

namespace crowdcensus {

RegionMap RegionMap::from_csv(std::string_view csv_text) {
  csv::Table table = csv::parse(csv_text);
  std::size_t country_col = table.column("country");
  std::size_t region_col = table.column("region");
  RegionMap map;
  for (std::size_t i = 0; i < table.rows.size(); ++i) {
    auto region = parse_region(table.rows[i][region_col]);
    if (!region) {
      throw MalformedRow("line " + std::to_string(table.line_numbers[i]) + ": unknown region '" +
                         table.rows[i][region_col] + "'");
    }
    std::string key = normalize(table.rows[i][country_col]);
    if (key.empty()) throw MalformedRow("line " + std::to_string(table.line_numbers[i]) + ": empty country");
    auto [it, inserted] = map.table_.emplace(key, *region);
    if (!inserted && it->second != *region) throw DuplicateKey("country '" + key + "' mapped to two regions");
  }
  return map;
}

RegionMap RegionMap::load(const std::string& path) {
  csv::Table table = csv::read_file(path);
  return from_csv(csv::to_string(table));
}

const RegionMap& RegionMap::builtin() {
  static const RegionMap map = from_csv(default_geo3_csv());
  return map;
}

std::string RegionMap::normalize(std::string_view country) {
  std::string out;
  bool pending_space = false;
  for (unsigned char c : country) {
    if (c == '.') continue;
    if (std::isspace(c)) {
      pending_space = !out.empty();
      continue;
    }
    if (pending_space) out.push_back(' ');
    pending_space = false;
    out.push_back(static_cast<char>(std::tolower(c)));
  }
  return out;
}

std::optional<Region> RegionMap::lookup(std::string_view country) const {
  auto it = table_.find(normalize(country));
  if (it == table_.end()) return std::nullopt;
  return it->second;
}

void RegionMap::add(std::string_view country, Region region) { table_[normalize(country)] = region; }

}  // namespace crowdcensus
