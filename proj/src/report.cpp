#include "crowdcensus/report.hpp"

#include <algorithm>
#include <sstream>

#include <fmt/format.h>

#include "json.hpp"

#include "crowdcensus/csv.hpp"
#include "crowdcensus/error.hpp"

namespace crowdcensus::report {
namespace {

using J = nlohmann::ordered_json;

std::string pct(int k, int n) { return n > 0 ? fmt::format("{:.1f}", 100.0 * k / n) : ""; }
std::string pct(double p) { return fmt::format("{:.1f}", 100.0 * p); }

// Left-aligns text columns and right-aligns the rest.
std::string align(const std::vector<std::vector<std::string>>& rows, std::size_t text_columns) {
  std::vector<std::size_t> width;
  for (const auto& r : rows) {
    width.resize(std::max(width.size(), r.size()));
    for (std::size_t i = 0; i < r.size(); ++i) width[i] = std::max(width[i], r[i].size());
  }
  std::string out;
  for (const auto& r : rows) {
    std::string line;
    for (std::size_t i = 0; i < r.size(); ++i) {
      if (i) line += "  ";
      line += i < text_columns ? fmt::format("{:<{}}", r[i], width[i]) : fmt::format("{:>{}}", r[i], width[i]);
    }
    while (!line.empty() && line.back() == ' ') line.pop_back();
    out += line + "\n";
  }
  return out;
}

std::string to_csv(const std::vector<std::vector<std::string>>& rows) {
  std::ostringstream os;
  for (const auto& r : rows) csv::write_row(os, r);
  return os.str();
}

std::string letter(int cluster) { return std::string(1, static_cast<char>('A' + cluster - 1)); }

std::string mission_group(const PipelineRun& run, const std::string& collection) {
  if (!run.cluster) return "";
  const auto& a = run.cluster->mission.partition.assignment;
  auto it = a.find(collection);
  return it == a.end() ? "" : std::to_string(it->second);
}

std::string count_with_pct(int k, int n) {
  return n > 0 ? fmt::format("{} ({:.0f}%)", k, 100.0 * k / n) : std::to_string(k);
}

}  // namespace

std::map<std::string, CollectionInfo> parse_collections_csv(std::string_view csv_text) {
  csv::Table table = csv::parse(csv_text);
  std::map<std::string, CollectionInfo> out;
  for (std::size_t i = 0; i < table.rows.size(); ++i) {
    csv::RowView row(table, i);
    const auto& id = row["collection_id"];
    if (out.contains(id)) throw DuplicateKey("collection " + id + " listed twice");
    out[id] = {row.get_or_empty("region"), row.get_or_empty("type")};
  }
  return out;
}

RenderedTable emit_table1(const PipelineRun& run) {
  if (!run.infer || !run.ingest) throw StageMissing("coverage table needs the infer stage");
  std::map<std::string, int> scraped;
  std::map<std::string, std::string> date;
  for (const auto& r : run.ingest->all_records) {
    ++scraped[r.key.collection_id];
    date[r.key.collection_id] = std::max(date[r.key.collection_id], r.scrape_date);
  }

  std::vector<std::vector<std::string>> csv_rows = {{"group", "collection", "region", "type", "date", "scraped",
                                                     "sampled", "iia", "cgi", "cei", "cri", "cbi", "iia_pct",
                                                     "cgi_pct", "cei_pct", "cri_pct", "cbi_pct"}};
  std::vector<std::vector<std::string>> text_rows = {
      {"Group", "Collection", "Region", "Type", "Date", "Scraped", "Sampled", "IIA", "CGI", "CEI", "CRI", "CBI"}};
  int total_scraped = 0;
  for (const auto& t : run.infer->tallies) {
    bool overall = t.collection_id == "Overall";
    int s = overall ? total_scraped : scraped[t.collection_id];
    total_scraped += overall ? 0 : s;
    CollectionInfo info;
    if (auto it = run.collections.find(t.collection_id); it != run.collections.end()) info = it->second;
    std::string group = overall ? "" : mission_group(run, t.collection_id);
    std::string d = overall ? "" : date[t.collection_id];
    csv_rows.push_back({group, t.collection_id, info.region, info.type, d, std::to_string(s),
                        std::to_string(t.sampled), std::to_string(t.iia), std::to_string(t.cgi),
                        std::to_string(t.cei), std::to_string(t.cri), std::to_string(t.cbi), pct(t.iia, t.sampled),
                        pct(t.cgi, t.iia), pct(t.cei, t.iia), pct(t.cri, t.iia), pct(t.cbi, t.iia)});
    text_rows.push_back({group, t.collection_id, info.region, info.type, d, std::to_string(s),
                         std::to_string(t.sampled), count_with_pct(t.iia, t.sampled), count_with_pct(t.cgi, t.iia),
                         count_with_pct(t.cei, t.iia), count_with_pct(t.cri, t.iia), count_with_pct(t.cbi, t.iia)});
  }
  return {to_csv(csv_rows), align(text_rows, 5)};
}

RenderedTable emit_table2(const PipelineRun& run) {
  if (!run.stats) throw StageMissing("diversity table needs the stats stage");
  const auto& s = *run.stats;
  std::vector<std::string> header = {"group", "collection"};
  std::vector<std::string> text_header = {"Group", "Collection"};
  for (auto c : stats::kDiversityCategories) {
    for (auto suffix : {"_pct", "_ci_low", "_ci_high", "_flag"}) header.push_back(std::string(c) + suffix);
    text_header.push_back(std::string(c) + " %");
    text_header.push_back("CI");
  }
  std::vector<std::vector<std::string>> csv_rows = {header}, text_rows = {text_header};

  auto add_row = [&](const std::string& group, const std::string& collection) {
    std::vector<std::string> row = {group, collection}, text = {group, collection};
    for (auto c : stats::kDiversityCategories) {
      const stats::ProportionEstimate* e = s.find(collection, std::string(c));
      const stats::OutlierResult* o = s.outlier(collection, std::string(c));
      std::string flag = o ? std::string(stats::to_token(o->direction)) : "";
      if (!e) {
        row.insert(row.end(), {"", "", "", flag});
        text.insert(text.end(), {"", ""});
        continue;
      }
      row.insert(row.end(), {pct(e->p_hat), pct(e->ci_low), pct(e->ci_high), flag});
      std::string mark = flag == "higher" ? "+" : flag == "lower" ? "-" : "";
      text.push_back(pct(e->p_hat) + mark);
      text.push_back(fmt::format("[{},{}]", pct(e->ci_low), pct(e->ci_high)));
    }
    csv_rows.push_back(std::move(row));
    text_rows.push_back(std::move(text));
  };
  std::vector<std::string> groups;
  for (const auto& row : s.table.groups) groups.push_back(row.group);
  if (run.cluster) {
    std::stable_sort(groups.begin(), groups.end(), [&](const auto& a, const auto& b) {
      return run.cluster->mission.partition.assignment.at(a) < run.cluster->mission.partition.assignment.at(b);
    });
  }
  for (const auto& g : groups) add_row(mission_group(run, g), g);
  add_row("", "Overall");
  return {to_csv(csv_rows), align(text_rows, 2)};
}

std::string emit_fig2_data(const PipelineRun& run) {
  if (!run.cluster) throw StageMissing("figure data needs the cluster stage");
  const auto& c = *run.cluster;
  auto value = [](const stats::GroupProfile& p, const char* name) -> J {
    auto it = p.values.find(name);
    return it == p.values.end() ? J(nullptr) : J(it->second);
  };
  std::map<std::string, const stats::GroupProfile*> profile;
  for (const auto& p : c.profiles) profile[p.group] = &p;

  J doc;
  J a;
  a["x"] = "north_america";
  a["y"] = "birth_year_scaled";
  a["points"] = J::array();
  for (const auto& v : c.mission.vectors) {
    auto idx = [&](const std::string& name) {
      return std::find(v.names.begin(), v.names.end(), name) - v.names.begin();
    };
    J pt;
    pt["group"] = v.group;
    pt["x"] = v.coords[idx("north_america")];
    pt["y"] = v.coords[idx("birth_year_scaled")];
    pt["avg_birth_year"] = value(*profile.at(v.group), "avg_birth_year");
    pt["mission_cluster"] = c.mission.partition.assignment.at(v.group);
    pt["diversity_cluster"] = letter(c.diversity.partition.assignment.at(v.group));
    a["points"].push_back(std::move(pt));
  }
  doc["panel_a"] = std::move(a);

  J b;
  b["x"] = "women";
  b["y"] = "white";
  b["points"] = J::array();
  for (const auto& v : c.diversity.vectors) {
    const auto& p = *profile.at(v.group);
    J pt;
    pt["group"] = v.group;
    pt["x"] = value(p, "women");
    pt["y"] = value(p, "white");
    pt["diversity_cluster"] = letter(c.diversity.partition.assignment.at(v.group));
    pt["mission_cluster"] = c.mission.partition.assignment.at(v.group);
    b["points"].push_back(std::move(pt));
  }
  doc["panel_b"] = std::move(b);

  J cx;
  cx["rows"] = "mission_cluster";
  cx["columns"] = "diversity_cluster";
  cx["cells"] = J::array();
  int total = 0;
  for (int r = 1; r <= c.crosstab.rows; ++r) {
    for (int col = 1; col <= c.crosstab.cols; ++col) {
      auto it = c.crosstab.cells.find({r, col});
      std::vector<std::string> leaves = it == c.crosstab.cells.end() ? std::vector<std::string>{} : it->second;
      total += static_cast<int>(leaves.size());
      cx["cells"].push_back({{"mission_cluster", r}, {"diversity_cluster", letter(col)},
                             {"count", leaves.size()}, {"groups", leaves}});
    }
  }
  cx["total"] = total;
  doc["panel_c"] = std::move(cx);
  return doc.dump(2) + "\n";
}

std::string emit_fig2_svg(const PipelineRun& run) {
  J data = J::parse(emit_fig2_data(run));
  static const char* palette[] = {"#1b9e77", "#d95f02", "#7570b3", "#e7298a", "#66a61e",
                                  "#e6ab02", "#a6761d", "#666666"};
  constexpr int size = 320, margin = 40;
  std::string svg = fmt::format(
      "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{}\" height=\"{}\" font-family=\"sans-serif\" "
      "font-size=\"9\">\n",
      2 * size, size);
  auto panel = [&](const J& p, int x0, const char* color_key, const char* label_key, const std::string& title) {
    int plot = size - 2 * margin;
    svg += fmt::format("<g transform=\"translate({},0)\">\n", x0);
    svg += fmt::format("<text x=\"{}\" y=\"16\">{}</text>\n", margin, title);
    svg += fmt::format("<rect x=\"{}\" y=\"{}\" width=\"{}\" height=\"{}\" fill=\"none\" stroke=\"black\"/>\n",
                       margin, margin, plot, plot);
    svg += fmt::format("<text x=\"{}\" y=\"{}\">{}</text>\n", margin, size - 12, p["x"].get<std::string>());
    svg += fmt::format("<text x=\"4\" y=\"{}\">{}</text>\n", margin - 4, p["y"].get<std::string>());
    for (const auto& pt : p["points"]) {
      if (pt["x"].is_null() || pt["y"].is_null()) continue;
      double x = std::clamp(pt["x"].get<double>(), 0.0, 1.0), y = std::clamp(pt["y"].get<double>(), 0.0, 1.0);
      int ci = 0;
      if (pt[color_key].is_number()) ci = pt[color_key].get<int>() - 1;
      else ci = pt[color_key].get<std::string>()[0] - 'A';
      std::string label = pt[label_key].is_number() ? std::to_string(pt[label_key].get<int>())
                                                    : pt[label_key].get<std::string>();
      double cx = margin + x * plot, cy = margin + (1 - y) * plot;
      svg += fmt::format("<circle cx=\"{:.1f}\" cy=\"{:.1f}\" r=\"4\" fill=\"{}\"/>\n", cx, cy, palette[ci % 8]);
      svg += fmt::format("<text x=\"{:.1f}\" y=\"{:.1f}\">{} {}</text>\n", cx + 5, cy - 3,
                         pt["group"].get<std::string>(), label);
    }
    svg += "</g>\n";
  };
  panel(data["panel_a"], 0, "mission_cluster", "diversity_cluster", "A: mission clusters");
  panel(data["panel_b"], size, "diversity_cluster", "mission_cluster", "B: diversity clusters");
  return svg + "</svg>\n";
}

std::string manifest_json(const PipelineRun& run, const std::vector<std::string>& outputs) {
  J doc;
  doc["tool"] = "crowdcensus";
  doc["version"] = run.version;
  doc["timestamp"] = run.timestamp ? J(*run.timestamp) : J(nullptr);
  doc["seed"] = run.seed;
  doc["inputs"] = {{"records", run.inputs.records},
                   {"responses", run.inputs.responses},
                   {"exclusions", run.inputs.exclusions},
                   {"repairs", run.inputs.repairs},
                   {"collections", run.inputs.collections},
                   {"region_map", run.inputs.region_map.empty() ? "builtin" : run.inputs.region_map}};
  J config = J::object();
  for (const auto& [k, v] : run.config.to_map()) config[k] = v;
  doc["config"] = std::move(config);

  J stages = J::object();
  if (run.ingest) {
    stages["ingest"] = {{"records", run.ingest->all_records.size()},
                        {"firms_dropped", run.ingest->dropped_firms.size()},
                        {"responses", run.ingest->pool.total_responses()},
                        {"warnings", run.ingest->warnings.size()}};
  }
  if (run.screen) {
    std::size_t applied = 0;
    for (const auto& l : run.screen->applied) applied += l.worker_ids.size();
    stages["screen"] = {{"workers", run.screen->profiles.size()},
                        {"flagged", run.screen->flagged.worker_ids.size()},
                        {"excluded", applied},
                        {"responses_removed", run.screen->screened.report.total}};
  }
  if (run.infer && !run.infer->tallies.empty()) {
    const auto& o = run.infer->tallies.back();
    stages["infer"] = {{"sampled", o.sampled}, {"iia", o.iia}, {"cgi", o.cgi},
                       {"cei", o.cei},         {"cri", o.cri}, {"cbi", o.cbi}};
  }
  if (run.reconcile) {
    J r;
    r["linked_identities"] = run.reconcile->groups.size();
    for (auto a : reconcile::kAllAttributes) {
      r[std::string(reconcile::to_token(a))] = {
          {"conflict", run.reconcile->consistency.count(a, reconcile::ConsistencyStatus::Conflict)},
          {"partial_missing", run.reconcile->consistency.count(a, reconcile::ConsistencyStatus::PartialMissing)}};
    }
    r["repairs_proposed"] = run.reconcile->proposals.size();
    r["repairs_applied"] = run.reconcile->audit.size();
    stages["reconcile"] = std::move(r);
  }
  if (run.stats) {
    int flagged = 0;
    for (const auto& o : run.stats->outliers) flagged += o.direction != stats::Direction::NotSignificant ? 1 : 0;
    stages["stats"] = {{"groups", run.stats->table.groups.size()},
                       {"family_size", run.stats->family_size},
                       {"outliers_flagged", flagged}};
  }
  if (run.cluster) {
    auto summary = [](const ClusterRun& c) {
      return J{{"features", to_token(c.features)},
               {"requested_k", c.requested_k},
               {"k", c.partition.k},
               {"monotone", c.dendrogram.monotone()}};
    };
    stages["cluster"] = {{"mission", summary(run.cluster->mission)}, {"diversity", summary(run.cluster->diversity)}};
  }
  doc["stages"] = std::move(stages);
  doc["notes"] = run.notes;
  std::vector<std::string> sorted = outputs;
  std::sort(sorted.begin(), sorted.end());
  doc["outputs"] = sorted;
  return doc.dump(2) + "\n";
}

}  // namespace crowdcensus::report
