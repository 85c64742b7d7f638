#pragma once

#include <map>
#include <span>
#include <string>
#include <vector>

#include "crowdcensus/config.hpp"
#include "crowdcensus/stats.hpp"

namespace crowdcensus::cluster {

struct FeatureVector {
  std::string group;
  std::vector<std::string> names;
  std::vector<double> coords;
};

/// Coordinate names of a feature set, in canonical order.
std::vector<std::string> coordinate_names(FeatureSet set);

/// Mission sets end with "birth_year_scaled": the average birth year min-max
/// scaled over the given groups (0 for all when every year is equal).
/// Throws MissingFeature when a group lacks a coordinate.
std::vector<FeatureVector> build_features(const std::vector<stats::GroupProfile>& profiles, FeatureSet set);

double chebyshev(std::span<const double> u, std::span<const double> v);
/// Throws DimensionMismatch unless both vectors carry the same coordinates.
double chebyshev(const FeatureVector& u, const FeatureVector& v);

/// Dense symmetric matrix, row-major.
struct DistanceMatrix {
  std::size_t n = 0;
  std::vector<double> d;
  double at(std::size_t i, std::size_t j) const { return d[i * n + j]; }
};

DistanceMatrix distance_matrix(const std::vector<FeatureVector>& vectors);

namespace serial {
DistanceMatrix distance_matrix(const std::vector<FeatureVector>& vectors);
}  // namespace serial

/// Node ids: leaves are 0..n-1, merge t creates node n+t.
struct Merge {
  int left = 0;   // node whose smallest leaf label sorts first
  int right = 0;
  double height = 0;
  std::vector<std::string> left_members;
  std::vector<std::string> right_members;
};

struct Dendrogram {
  std::vector<std::string> leaves;
  std::vector<Merge> merges;
  Linkage linkage = Linkage::Upgma;
  /// Steps whose height fell below the previous merge height.
  std::vector<int> inversions;
  bool monotone() const { return inversions.empty(); }
};

/// Agglomerates from singletons. Each step merges the closest pair of
/// clusters; exact ties go to the lexicographically smallest pair of
/// per-cluster smallest leaf labels. UPGMA averages over all cross pairs of
/// original points; WPGMA averages the two merged clusters' distances.
Dendrogram agglomerate(const DistanceMatrix& distances, const std::vector<std::string>& labels,
                       Linkage linkage = Linkage::Upgma);
Dendrogram agglomerate(const std::vector<FeatureVector>& vectors, Linkage linkage = Linkage::Upgma);

struct Partition {
  int k = 0;
  /// Clusters ordered by smallest member label; members sorted.
  std::vector<std::vector<std::string>> clusters;
  /// Leaf -> 1-based cluster number.
  std::map<std::string, int> assignment;
};

/// Undoes the last k-1 merges. Throws InvalidK unless 1 <= k <= leaves.
Partition cut(const Dendrogram& dendrogram, int k);

struct CrossTab {
  int rows = 0;
  int cols = 0;
  std::map<std::pair<int, int>, std::vector<std::string>> cells;

  int count(int row, int col) const;
  int row_total(int row) const;
  int col_total(int col) const;
};

/// Rows are clusters of `a`, columns clusters of `b`. Throws LeafMismatch
/// unless both partitions cover the same leaves.
CrossTab cross_tab(const Partition& a, const Partition& b);

std::string to_newick(const Dendrogram& dendrogram);
std::string dendrogram_to_json(const Dendrogram& dendrogram);
std::string partition_to_csv(const Partition& partition);
Partition parse_partition_csv(std::string_view csv_text);
/// Matrix layout: header `cluster,<b clusters...>,total`, one row per a cluster.
std::string crosstab_to_csv(const CrossTab& table);
std::string features_to_csv(const std::vector<FeatureVector>& vectors);

}  // namespace crowdcensus::cluster
