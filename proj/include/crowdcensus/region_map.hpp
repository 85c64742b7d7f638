#pragma once

#include <map>
#include <optional>
#include <string>
#include <string_view>

#include "crowdcensus/types.hpp"

namespace crowdcensus {

/// Country name -> GEO3 region. Keys are normalized (trimmed, case-folded,
/// periods dropped, internal whitespace collapsed), so "U.S.", "us" and
/// " US " resolve to the same entry. Aliases are ordinary rows.
class RegionMap {
 public:
  /// Parses a `country,region` CSV. Region cells accept tokens or display names.
  static RegionMap from_csv(std::string_view csv_text);
  static RegionMap load(const std::string& path);
  /// The table compiled in from data/geo3_map.csv.
  static const RegionMap& builtin();

  static std::string normalize(std::string_view country);

  std::optional<Region> lookup(std::string_view country) const;
  void add(std::string_view country, Region region);
  std::size_t size() const { return table_.size(); }
  const std::map<std::string, Region>& entries() const { return table_; }

 private:
  std::map<std::string, Region> table_;
};

std::string_view default_geo3_csv();

}  // namespace crowdcensus
