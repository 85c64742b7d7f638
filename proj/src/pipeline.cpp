#include "crowdcensus/pipeline.hpp"

#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include "crowdcensus/csv.hpp"
#include "crowdcensus/error.hpp"

namespace crowdcensus::pipeline {
namespace {

namespace fs = std::filesystem;

// Runs one stage, converting any error into a StageFailure for that stage.
template <typename F>
auto stage(Stage s, F&& body) {
  try {
    return body();
  } catch (const StageFailure&) {
    throw;
  } catch (const Error& e) {
    throw StageFailure(s, e.kind(), e.what());
  } catch (const std::exception& e) {
    throw StageFailure(s, "Error", e.what());
  }
}

std::string warnings_csv(const std::vector<ingest::IngestWarning>& warnings) {
  std::ostringstream os;
  os << "line,message\n";
  for (const auto& w : warnings) csv::write_row(os, {std::to_string(w.line), w.message});
  return os.str();
}

class Writer {
 public:
  explicit Writer(std::string dir) : dir_(std::move(dir)) {}
  void operator()(const std::string& name, const std::string& content) {
    write_file(dir_, name, content);
    names_.push_back(name);
  }
  const std::vector<std::string>& names() const { return names_; }

 private:
  std::string dir_;
  std::vector<std::string> names_;
};

}  // namespace

std::string_view to_token(Stage s) {
  switch (s) {
    case Stage::Ingest: return "ingest";
    case Stage::Screen: return "screen";
    case Stage::Infer: return "infer";
    case Stage::Reconcile: return "reconcile";
    case Stage::Stats: return "stats";
    case Stage::Cluster: return "cluster";
    case Stage::Report: return "report";
  }
  return "?";
}

int exit_code(Stage s) { return 10 + static_cast<int>(s); }

StageFailure::StageFailure(Stage stage, std::string kind, const std::string& message)
    : std::runtime_error(std::string(to_token(stage)) + " stage failed: " + message),
      stage_(stage),
      kind_(std::move(kind)) {}

void write_file(const std::string& dir, const std::string& name, const std::string& content) {
  fs::create_directories(dir);
  fs::path path = fs::path(dir) / name;
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InvalidInput("cannot write " + path.string());
  out << content;
  if (!out) throw InvalidInput("failed writing " + path.string());
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InvalidInput("cannot open " + path);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

report::IngestOutput run_ingest(const std::string& records_path, const std::string& responses_path) {
  report::IngestOutput out;
  out.all_records = ingest::read_records(records_path);
  std::sort(out.all_records.begin(), out.all_records.end(),
            [](const EntityRecord& a, const EntityRecord& b) { return a.key < b.key; });
  auto filtered = ingest::prefilter_firms(out.all_records);
  out.records = std::move(filtered.kept);
  out.dropped_firms = std::move(filtered.dropped);

  auto parsed = ingest::read_responses(responses_path);
  out.warnings = std::move(parsed.warnings);
  std::set<RecordKey> firms;
  for (const auto& r : out.dropped_firms) firms.insert(r.key);
  std::vector<AnnotationResponse> kept;
  for (auto& r : parsed.responses) {
    if (firms.contains(r.record)) {
      out.warnings.push_back({0, "response " + r.hit_id + " names a pre-filtered firm record and is ignored"});
      continue;
    }
    kept.push_back(std::move(r));
  }
  out.pool = ingest::pool_responses(kept, out.records);
  return out;
}

report::ScreenOutput run_screen(const ingest::ResponsePool& pool, std::vector<screening::ExclusionList> manual,
                                const PipelineConfig& config, const RegionMap& regions, bool confirm_flagged) {
  report::ScreenOutput out;
  out.profiles = screening::profile_workers(pool, config.screening.fast_cutoff_secs);
  screening::score_agreement(out.profiles, pool, regions, config.campaign, config.screening.volume_threshold);
  out.flagged = screening::flag_suspects(out.profiles, config.screening);
  out.applied = std::move(manual);
  if (confirm_flagged && !out.flagged.worker_ids.empty()) out.applied.push_back(out.flagged);
  out.screened = screening::apply_exclusions(pool, out.applied);
  return out;
}

report::InferOutput run_infer(const ingest::ResponsePool& deployed, const ingest::ResponsePool& screened,
                              const RegionMap& regions, const CampaignConfig& config) {
  report::InferOutput out;
  out.inferences = consensus::run_consensus(screened, regions, config);
  out.tallies = consensus::tally_collections(deployed, out.inferences);
  return out;
}

report::ReconcileOutput run_reconcile(const std::vector<EntityRecord>& records,
                                      const std::vector<consensus::ConsensusInference>& inferences,
                                      const std::vector<reconcile::Repair>& approved) {
  report::ReconcileOutput out;
  out.groups = reconcile::link_duplicates(records, inferences);
  out.consistency = reconcile::check_consistency(out.groups, inferences);
  for (const auto& e : out.consistency.entries) {
    out.proposals.insert(out.proposals.end(), e.proposals.begin(), e.proposals.end());
  }
  auto repaired = reconcile::apply_repairs(inferences, approved);
  out.inferences = std::move(repaired.inferences);
  out.audit = std::move(repaired.audit);
  return out;
}

report::ClusterOutput run_cluster(const std::vector<stats::GroupProfile>& profiles, const ClusterConfig& config,
                                  std::vector<std::string>& notes) {
  if (profiles.size() < 2) throw InvalidInput("clustering needs at least two groups");
  report::ClusterOutput out;
  out.profiles = profiles;
  auto one = [&](FeatureSet features, int k, const char* what) {
    report::ClusterRun c;
    c.features = features;
    c.requested_k = k;
    c.vectors = cluster::build_features(profiles, features);
    c.dendrogram = cluster::agglomerate(c.vectors, config.linkage);
    int n = static_cast<int>(c.vectors.size());
    if (k > n) {
      notes.push_back(std::string(what) + " k=" + std::to_string(k) + " clamped to " + std::to_string(n) +
                      " groups");
      k = n;
    }
    c.partition = cluster::cut(c.dendrogram, k);
    if (!c.dendrogram.monotone()) notes.push_back(std::string(what) + " dendrogram has height inversions");
    return c;
  };
  out.mission = one(config.mission_features, config.mission_k, "mission");
  out.diversity = one(config.diversity_features, config.diversity_k, "diversity");
  out.crosstab = cluster::cross_tab(out.mission.partition, out.diversity.partition);
  return out;
}

report::PipelineRun run_pipeline(const RunOptions& options) {
  report::PipelineRun run;
  run.inputs = options.inputs;
  run.config = options.config;
  run.timestamp = options.timestamp;
  run.version = CROWDCENSUS_VERSION;
  run.seed = options.seed;
  Writer write(options.out_dir);
  const PipelineConfig& cfg = options.config;

  RegionMap regions = stage(Stage::Ingest, [&] {
    return options.inputs.region_map.empty() ? RegionMap::builtin() : RegionMap::load(options.inputs.region_map);
  });
  run.ingest = stage(Stage::Ingest, [&] {
    auto out = run_ingest(options.inputs.records, options.inputs.responses);
    if (!options.inputs.collections.empty()) {
      run.collections = report::parse_collections_csv(read_file(options.inputs.collections));
    }
    write("records.csv", ingest::records_to_csv(out.records));
    write("firms_dropped.csv", ingest::records_to_csv(out.dropped_firms));
    write("pool.csv", ingest::pool_to_csv(out.pool));
    write("ingest_warnings.csv", warnings_csv(out.warnings));
    return out;
  });

  run.screen = stage(Stage::Screen, [&] {
    std::vector<screening::ExclusionList> manual;
    if (!options.inputs.exclusions.empty()) {
      manual = screening::parse_exclusions_csv(read_file(options.inputs.exclusions));
    }
    auto out = run_screen(run.ingest->pool, std::move(manual), cfg, regions, options.confirm_flagged);
    write("worker_profiles.csv", screening::profiles_to_csv(out.profiles));
    write("flagged_workers.csv", screening::exclusions_to_csv(out.flagged));
    write("removal_report.json", screening::report_to_json(out.screened.report));
    return out;
  });

  run.infer = stage(Stage::Infer, [&] {
    auto out = run_infer(run.ingest->pool, run.screen->screened.pool, regions, cfg.campaign);
    write("inferences.csv", consensus::inferences_to_csv(out.inferences));
    write("diagnostics.json", consensus::diagnostics_json(out.inferences));
    write("coverage.csv", consensus::tallies_to_csv(out.tallies));
    return out;
  });

  run.reconcile = stage(Stage::Reconcile, [&] {
    std::vector<reconcile::Repair> approved;
    if (!options.inputs.repairs.empty()) approved = reconcile::parse_repairs_csv(read_file(options.inputs.repairs));
    auto out = run_reconcile(run.ingest->records, run.infer->inferences, approved);
    write("consistency.json", reconcile::report_to_json(out.consistency));
    write("repairs_proposed.csv", reconcile::repairs_to_csv(out.proposals));
    write("repair_audit.csv", reconcile::audit_to_csv(out.audit));
    write("inferences_reconciled.csv", consensus::inferences_to_csv(out.inferences));
    return out;
  });

  run.stats = stage(Stage::Stats, [&] {
    const auto& inferences = cfg.stats.include_repaired ? run.reconcile->inferences : run.infer->inferences;
    auto table = stats::tabulate(run.ingest->records, inferences);
    auto out = stats::compute_stats(table, cfg.stats);
    write("stats.csv", stats::stats_to_csv(out));
    write("stats.json", stats::stats_to_json(out));
    write("profiles.csv", stats::profiles_to_csv(stats::to_profiles(table)));
    return out;
  });

  auto profiles = stats::to_profiles(run.stats->table);
  if (profiles.size() < 2) {
    run.notes.push_back("cluster stage skipped: fewer than two collections");
  } else {
    run.cluster = stage(Stage::Cluster, [&] {
      auto out = run_cluster(profiles, cfg.cluster, run.notes);
      for (const auto* c : {&out.mission, &out.diversity}) {
        std::string prefix = c == &out.mission ? "mission" : "diversity";
        write(prefix + "_features.csv", cluster::features_to_csv(c->vectors));
        write(prefix + "_dendrogram.json", cluster::dendrogram_to_json(c->dendrogram));
        write(prefix + "_dendrogram.nwk", cluster::to_newick(c->dendrogram));
        write(prefix + "_partition.csv", cluster::partition_to_csv(c->partition));
      }
      write("crosstab.csv", cluster::crosstab_to_csv(out.crosstab));
      return out;
    });
  }

  stage(Stage::Report, [&] {
    auto t1 = report::emit_table1(run);
    write("table1.csv", t1.csv);
    write("table1.txt", t1.text);
    auto t2 = report::emit_table2(run);
    write("table2.csv", t2.csv);
    write("table2.txt", t2.text);
    if (run.cluster) {
      write("fig2.json", report::emit_fig2_data(run));
      write("fig2.svg", report::emit_fig2_svg(run));
    }
    std::vector<std::string> outputs = write.names();
    outputs.emplace_back("config.txt");
    outputs.emplace_back("manifest.json");
    write("config.txt", cfg.to_text());
    write("manifest.json", report::manifest_json(run, outputs));
    return 0;
  });
  return run;
}

}  // namespace crowdcensus::pipeline
