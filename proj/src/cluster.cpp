#include "crowdcensus/cluster.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>
#include <sstream>

#include <fmt/format.h>

#include "json.hpp"

#include "crowdcensus/csv.hpp"
#include "crowdcensus/error.hpp"

namespace crowdcensus::cluster {
namespace {

constexpr std::string_view kScaledYear = "birth_year_scaled";

double pair_distance(const FeatureVector& u, const FeatureVector& v) { return chebyshev(u.coords, v.coords); }

void check_same_coordinates(const std::vector<FeatureVector>& vectors) {
  for (const auto& v : vectors) {
    if (v.names != vectors.front().names || v.coords.size() != v.names.size()) {
      throw DimensionMismatch("group " + v.group + " has different coordinates from " + vectors.front().group);
    }
  }
}

std::vector<std::string> collect_members(const Dendrogram& d, int node) {
  int n = static_cast<int>(d.leaves.size());
  if (node < n) return {d.leaves[node]};
  const Merge& m = d.merges[node - n];
  std::vector<std::string> out = m.left_members;
  out.insert(out.end(), m.right_members.begin(), m.right_members.end());
  std::sort(out.begin(), out.end());
  return out;
}

std::string newick_label(const std::string& s) {
  if (s.find_first_of(" \t()[]':;,") == std::string::npos) return s;
  std::string out = "'";
  for (char c : s) {
    if (c == '\'') out += '\'';
    out += c;
  }
  return out + "'";
}

double node_height(const Dendrogram& d, int node) {
  int n = static_cast<int>(d.leaves.size());
  return node < n ? 0 : d.merges[node - n].height;
}

void newick(const Dendrogram& d, int node, std::string& out) {
  int n = static_cast<int>(d.leaves.size());
  if (node < n) {
    out += newick_label(d.leaves[node]);
    return;
  }
  const Merge& m = d.merges[node - n];
  out += '(';
  newick(d, m.left, out);
  out += fmt::format(":{:.6g},", m.height - node_height(d, m.left));
  newick(d, m.right, out);
  out += fmt::format(":{:.6g})", m.height - node_height(d, m.right));
}

nlohmann::ordered_json tree_json(const Dendrogram& d, int node) {
  int n = static_cast<int>(d.leaves.size());
  if (node < n) return {{"leaf", d.leaves[node]}};
  const Merge& m = d.merges[node - n];
  return {{"height", m.height}, {"children", {tree_json(d, m.left), tree_json(d, m.right)}}};
}

}  // namespace

std::vector<std::string> coordinate_names(FeatureSet set) {
  std::vector<std::string> names;
  switch (set) {
    case FeatureSet::MissionA:
    case FeatureSet::MissionB:
      for (auto r : kAllRegions) {
        if (r == Region::Polar) continue;
        if (r == Region::WestAsia && set == FeatureSet::MissionB) continue;
        names.emplace_back(to_token(r));
      }
      names.emplace_back(kScaledYear);
      break;
    case FeatureSet::DiversityA:
    case FeatureSet::DiversityB:
      for (auto c : stats::kDiversityCategories) {
        if (c == "white" && set == FeatureSet::DiversityB) continue;
        names.emplace_back(c);
      }
      break;
  }
  return names;
}

std::vector<FeatureVector> build_features(const std::vector<stats::GroupProfile>& profiles, FeatureSet set) {
  auto names = coordinate_names(set);
  auto value = [](const stats::GroupProfile& p, const std::string& name) {
    auto it = p.values.find(name);
    if (it == p.values.end()) throw MissingFeature("group " + p.group + " has no value for " + name);
    return it->second;
  };

  bool mission = set == FeatureSet::MissionA || set == FeatureSet::MissionB;
  double lo = 0, hi = 0;
  if (mission && !profiles.empty()) {
    lo = hi = value(profiles.front(), "avg_birth_year");
    for (const auto& p : profiles) {
      double y = value(p, "avg_birth_year");
      lo = std::min(lo, y);
      hi = std::max(hi, y);
    }
  }

  std::vector<FeatureVector> out;
  for (const auto& p : profiles) {
    FeatureVector v{p.group, names, {}};
    for (const auto& name : names) {
      double x;
      if (name == kScaledYear) {
        x = hi > lo ? (value(p, "avg_birth_year") - lo) / (hi - lo) : 0;
      } else {
        x = value(p, name);
        if (x < 0 || x > 1) throw InvalidInput(fmt::format("group {}: {} = {} is not a fraction", p.group, name, x));
      }
      v.coords.push_back(x);
    }
    out.push_back(std::move(v));
  }
  return out;
}

double chebyshev(std::span<const double> u, std::span<const double> v) {
  if (u.size() != v.size()) throw DimensionMismatch(fmt::format("{} vs {} coordinates", u.size(), v.size()));
  double m = 0;
  for (std::size_t i = 0; i < u.size(); ++i) m = std::max(m, std::abs(u[i] - v[i]));
  return m;
}

double chebyshev(const FeatureVector& u, const FeatureVector& v) {
  if (u.names != v.names) throw DimensionMismatch("groups " + u.group + " and " + v.group + " differ in coordinates");
  return chebyshev(u.coords, v.coords);
}

DistanceMatrix distance_matrix(const std::vector<FeatureVector>& vectors) {
  if (!vectors.empty()) check_same_coordinates(vectors);
  DistanceMatrix m{vectors.size(), std::vector<double>(vectors.size() * vectors.size(), 0.0)};
  const std::ptrdiff_t n = static_cast<std::ptrdiff_t>(m.n);
  #pragma omp parallel for schedule(dynamic, 8)
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    for (std::ptrdiff_t j = i + 1; j < n; ++j) {
      double d = pair_distance(vectors[i], vectors[j]);
      m.d[i * n + j] = d;
      m.d[j * n + i] = d;
    }
  }
  return m;
}

namespace serial {

DistanceMatrix distance_matrix(const std::vector<FeatureVector>& vectors) {
  if (!vectors.empty()) check_same_coordinates(vectors);
  DistanceMatrix m{vectors.size(), std::vector<double>(vectors.size() * vectors.size(), 0.0)};
  for (std::size_t i = 0; i < m.n; ++i) {
    for (std::size_t j = i + 1; j < m.n; ++j) {
      m.d[i * m.n + j] = m.d[j * m.n + i] = pair_distance(vectors[i], vectors[j]);
    }
  }
  return m;
}

}  // namespace serial

Dendrogram agglomerate(const DistanceMatrix& distances, const std::vector<std::string>& labels, Linkage linkage) {
  const int n = static_cast<int>(labels.size());
  if (n < 2) throw InvalidInput("clustering needs at least two groups");
  if (distances.n != labels.size()) throw DimensionMismatch("distance matrix does not match the label count");
  if (std::set<std::string>(labels.begin(), labels.end()).size() != labels.size()) {
    throw InvalidInput("group labels must be unique");
  }

  // Slot s holds one active cluster. For UPGMA link[s][t] is the sum of all
  // cross-pair distances; for WPGMA it is the current linkage distance.
  std::vector<std::vector<double>> link(n, std::vector<double>(n));
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) link[i][j] = distances.at(i, j);
  }
  std::vector<int> node(n), size(n, 1);
  std::vector<std::string> min_label(labels);
  std::vector<std::vector<std::string>> members(n);
  std::vector<bool> active(n, true);
  for (int i = 0; i < n; ++i) {
    node[i] = i;
    members[i] = {labels[i]};
  }

  Dendrogram out;
  out.leaves = labels;
  out.linkage = linkage;
  for (int step = 0; step < n - 1; ++step) {
    int bi = -1, bj = -1;
    double best = 0;
    std::pair<std::string, std::string> best_key;
    for (int i = 0; i < n; ++i) {
      if (!active[i]) continue;
      for (int j = i + 1; j < n; ++j) {
        if (!active[j]) continue;
        double h = linkage == Linkage::Upgma ? link[i][j] / (static_cast<double>(size[i]) * size[j]) : link[i][j];
        std::pair<std::string, std::string> key = std::minmax(min_label[i], min_label[j]);
        if (bi < 0 || h < best || (h == best && key < best_key)) {
          bi = i;
          bj = j;
          best = h;
          best_key = std::move(key);
        }
      }
    }
    if (min_label[bj] < min_label[bi]) std::swap(bi, bj);

    Merge m{node[bi], node[bj], best, members[bi], members[bj]};
    if (!out.merges.empty() && best < out.merges.back().height) out.inversions.push_back(step);
    out.merges.push_back(std::move(m));

    // The merged cluster takes slot bi.
    for (int k = 0; k < n; ++k) {
      if (!active[k] || k == bi || k == bj) continue;
      double v = linkage == Linkage::Upgma ? link[bi][k] + link[bj][k] : (link[bi][k] + link[bj][k]) / 2;
      link[bi][k] = link[k][bi] = v;
    }
    active[bj] = false;
    size[bi] += size[bj];
    node[bi] = n + step;
    min_label[bi] = std::min(min_label[bi], min_label[bj]);
    members[bi].insert(members[bi].end(), members[bj].begin(), members[bj].end());
    std::sort(members[bi].begin(), members[bi].end());
  }
  return out;
}

Dendrogram agglomerate(const std::vector<FeatureVector>& vectors, Linkage linkage) {
  std::vector<std::string> labels;
  for (const auto& v : vectors) labels.push_back(v.group);
  return agglomerate(distance_matrix(vectors), labels, linkage);
}

Partition cut(const Dendrogram& d, int k) {
  const int n = static_cast<int>(d.leaves.size());
  if (k < 1 || k > n) throw InvalidK(fmt::format("k = {} with {} leaves", k, n));
  std::vector<int> top;  // nodes that are roots after n-k merges
  std::vector<bool> absorbed(n + d.merges.size(), false);
  for (int t = 0; t < n - k; ++t) {
    absorbed[d.merges[t].left] = true;
    absorbed[d.merges[t].right] = true;
  }
  for (int id = 0; id < 2 * n - k; ++id) {
    if (!absorbed[id]) top.push_back(id);
  }

  Partition p;
  p.k = k;
  for (int id : top) p.clusters.push_back(collect_members(d, id));
  std::sort(p.clusters.begin(), p.clusters.end(),
            [](const auto& a, const auto& b) { return a.front() < b.front(); });
  for (std::size_t c = 0; c < p.clusters.size(); ++c) {
    for (const auto& leaf : p.clusters[c]) p.assignment[leaf] = static_cast<int>(c) + 1;
  }
  return p;
}

int CrossTab::count(int row, int col) const {
  auto it = cells.find({row, col});
  return it == cells.end() ? 0 : static_cast<int>(it->second.size());
}

int CrossTab::row_total(int row) const {
  int s = 0;
  for (int c = 1; c <= cols; ++c) s += count(row, c);
  return s;
}

int CrossTab::col_total(int col) const {
  int s = 0;
  for (int r = 1; r <= rows; ++r) s += count(r, col);
  return s;
}

CrossTab cross_tab(const Partition& a, const Partition& b) {
  if (a.assignment.size() != b.assignment.size() ||
      !std::equal(a.assignment.begin(), a.assignment.end(), b.assignment.begin(),
                  [](const auto& x, const auto& y) { return x.first == y.first; })) {
    throw LeafMismatch("partitions cover different leaves");
  }
  CrossTab t;
  t.rows = static_cast<int>(a.clusters.size());
  t.cols = static_cast<int>(b.clusters.size());
  for (const auto& [leaf, ca] : a.assignment) t.cells[{ca, b.assignment.at(leaf)}].push_back(leaf);
  return t;
}

std::string to_newick(const Dendrogram& d) {
  std::string out;
  if (d.merges.empty()) {
    out = d.leaves.empty() ? "" : newick_label(d.leaves.front());
  } else {
    newick(d, static_cast<int>(d.leaves.size() + d.merges.size()) - 1, out);
  }
  return out + ";\n";
}

std::string dendrogram_to_json(const Dendrogram& d) {
  nlohmann::ordered_json doc;
  doc["linkage"] = to_token(d.linkage);
  doc["metric"] = "chebyshev";
  doc["leaves"] = d.leaves;
  doc["monotone"] = d.monotone();
  doc["inversions"] = d.inversions;
  doc["merges"] = nlohmann::ordered_json::array();
  for (std::size_t t = 0; t < d.merges.size(); ++t) {
    const auto& m = d.merges[t];
    doc["merges"].push_back({{"step", t + 1},
                             {"left", m.left_members},
                             {"right", m.right_members},
                             {"height", m.height}});
  }
  if (!d.merges.empty()) doc["tree"] = tree_json(d, static_cast<int>(d.leaves.size() + d.merges.size()) - 1);
  return doc.dump(2) + "\n";
}

std::string partition_to_csv(const Partition& p) {
  std::ostringstream os;
  os << "group,cluster\n";
  for (const auto& [leaf, c] : p.assignment) csv::write_row(os, {leaf, std::to_string(c)});
  return os.str();
}

Partition parse_partition_csv(std::string_view csv_text) {
  csv::Table table = csv::parse(csv_text);
  std::size_t gcol = table.column("group"), ccol = table.column("cluster");
  std::map<int, std::vector<std::string>> by_cluster;
  Partition p;
  for (std::size_t i = 0; i < table.rows.size(); ++i) {
    int c;
    try {
      c = std::stoi(table.rows[i][ccol]);
    } catch (const std::logic_error&) {
      throw MalformedRow(fmt::format("line {}: cluster must be an integer", table.line_numbers[i]));
    }
    p.assignment[table.rows[i][gcol]] = c;
    by_cluster[c].push_back(table.rows[i][gcol]);
  }
  for (auto& [c, leaves] : by_cluster) {
    std::sort(leaves.begin(), leaves.end());
    p.clusters.push_back(std::move(leaves));
  }
  p.k = static_cast<int>(p.clusters.size());
  return p;
}

std::string crosstab_to_csv(const CrossTab& t) {
  std::ostringstream os;
  std::vector<std::string> header = {"cluster"};
  for (int c = 1; c <= t.cols; ++c) header.push_back(std::to_string(c));
  header.emplace_back("total");
  csv::write_row(os, header);
  for (int r = 1; r <= t.rows; ++r) {
    std::vector<std::string> row = {std::to_string(r)};
    for (int c = 1; c <= t.cols; ++c) row.push_back(std::to_string(t.count(r, c)));
    row.push_back(std::to_string(t.row_total(r)));
    csv::write_row(os, row);
  }
  return os.str();
}

std::string features_to_csv(const std::vector<FeatureVector>& vectors) {
  std::ostringstream os;
  if (vectors.empty()) return "group\n";
  std::vector<std::string> header = {"group"};
  header.insert(header.end(), vectors.front().names.begin(), vectors.front().names.end());
  csv::write_row(os, header);
  for (const auto& v : vectors) {
    std::vector<std::string> row = {v.group};
    for (double x : v.coords) row.push_back(fmt::format("{:.10g}", x));
    csv::write_row(os, row);
  }
  return os.str();
}

}  // namespace crowdcensus::cluster
