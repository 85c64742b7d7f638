#include <algorithm>
#include <cstdlib>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#include <CLI11.hpp>
#include <fmt/core.h>

#include "crowdcensus/cluster.hpp"
#include "crowdcensus/csv.hpp"
#include "crowdcensus/error.hpp"
#include "crowdcensus/pipeline.hpp"
#include "crowdcensus/stats.hpp"
#include "crowdcensus/synth.hpp"
#include "json.hpp"

using namespace crowdcensus;
using pipeline::Stage;

namespace {

struct Globals {
  std::string config_path;
  std::string out_dir = "out";
  std::uint64_t seed = 0;
  std::string format = "csv";
};

struct Inputs {
  report::PipelineInputs paths;
  bool confirm_flagged = false;
};

void add_input_flags(CLI::App* cmd, Inputs& in, bool screening = true) {
  cmd->add_option("--records", in.paths.records, "records CSV or JSON")->required();
  cmd->add_option("--responses", in.paths.responses, "responses CSV or JSON")->required();
  cmd->add_option("--region-map", in.paths.region_map, "country,region CSV (default: builtin)");
  if (screening) {
    cmd->add_option("--exclusions", in.paths.exclusions, "worker_id,provenance CSV");
    cmd->add_flag("--confirm-flagged", in.confirm_flagged, "also exclude workers flagged by screening");
  }
}

template <typename F>
auto guarded(Stage s, F&& body) {
  try {
    return body();
  } catch (const pipeline::StageFailure&) {
    throw;
  } catch (const Error& e) {
    throw pipeline::StageFailure(s, e.kind(), e.what());
  } catch (const std::exception& e) {
    throw pipeline::StageFailure(s, "Error", e.what());
  }
}

RegionMap regions_for(const Inputs& in) {
  return in.paths.region_map.empty() ? RegionMap::builtin() : RegionMap::load(in.paths.region_map);
}

// Upstream stages in memory, up to and including `until`.
struct Upstream {
  report::IngestOutput ingest;
  std::optional<report::ScreenOutput> screen;
  std::optional<report::InferOutput> infer;
};

Upstream run_upstream(const Inputs& in, const PipelineConfig& cfg, const RegionMap& regions, Stage until) {
  Upstream up;
  up.ingest = guarded(Stage::Ingest, [&] { return pipeline::run_ingest(in.paths.records, in.paths.responses); });
  if (until == Stage::Ingest) return up;
  up.screen = guarded(Stage::Screen, [&] {
    std::vector<screening::ExclusionList> manual;
    if (!in.paths.exclusions.empty()) {
      manual = screening::parse_exclusions_csv(pipeline::read_file(in.paths.exclusions));
    }
    return pipeline::run_screen(up.ingest.pool, std::move(manual), cfg, regions, in.confirm_flagged);
  });
  if (until == Stage::Screen) return up;
  up.infer = guarded(Stage::Infer, [&] {
    return pipeline::run_infer(up.ingest.pool, up.screen->screened.pool, regions, cfg.campaign);
  });
  return up;
}

std::vector<EntityRecord> load_kept_records(const std::string& path) {
  return ingest::prefilter_firms(ingest::read_records(path)).kept;
}

std::string plan_to_csv(const stats::SamplePlan& p) {
  std::ostringstream os;
  os << "target_moe,confidence,iia_rate,proportion,required_iia,required_raw,stage2_draw\n";
  csv::write_row(os, {fmt::format("{}", p.target_moe), fmt::format("{}", p.confidence),
                      fmt::format("{}", p.iia_rate), fmt::format("{}", p.proportion),
                      std::to_string(p.required_iia), std::to_string(p.required_raw),
                      std::to_string(p.stage2_draw)});
  return os.str();
}

std::string workers_csv(const synth::Campaign& c) {
  std::ostringstream os;
  os << "worker_id,archetype\n";
  for (const auto& [id, a] : c.workers) csv::write_row(os, {id, std::string(synth::to_token(a))});
  return os.str();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Crowdsourced demographic inference for collection records"};
  app.set_version_flag("--version", std::string(CROWDCENSUS_VERSION));
  app.require_subcommand(1);

  Globals g;
  app.add_option("--config", g.config_path, "flat key = value config file");
  app.add_option("--out-dir", g.out_dir, "output directory");
  app.add_option("--seed", g.seed, "seed for simulation");
  app.add_option("--format", g.format, "csv or json where a command offers both")
      ->check(CLI::IsMember({"csv", "json"}));

  Inputs in;
  std::optional<std::string> timestamp;

  // ingest
  auto* c_ingest = app.add_subcommand("ingest", "validate inputs, drop firms, pool responses");
  add_input_flags(c_ingest, in, false);

  // screen
  auto* c_screen = app.add_subcommand("screen", "profile workers and flag suspected bad faith");
  add_input_flags(c_screen, in);
  std::optional<double> fast_cutoff, fast_frac, agreement;
  std::optional<int> volume;
  c_screen->add_option("--fast-cutoff", fast_cutoff, "seconds at or below which a response is fast");
  c_screen->add_option("--volume", volume, "minimum responses before a worker can be flagged");
  c_screen->add_option("--fast-frac", fast_frac, "fast-response share that flags a worker");
  c_screen->add_option("--agreement", agreement, "consensus agreement below which a worker is flagged");

  // infer
  auto* c_infer = app.add_subcommand("infer", "consensus inference per record");
  add_input_flags(c_infer, in);

  // reconcile
  auto* c_reconcile = app.add_subcommand("reconcile", "link duplicates, check consistency, apply repairs");
  add_input_flags(c_reconcile, in);
  c_reconcile->add_option("--approve", in.paths.repairs, "approved repairs CSV");

  // compare-reference
  auto* c_compare = app.add_subcommand("compare-reference", "cross-tabulate inferences against a reference");
  std::string reference_path, inferences_path, records_path, attribute = "gender";
  std::optional<std::string> collection;
  c_compare->add_option("reference", reference_path, "name_or_key,attribute,label CSV")->required();
  c_compare->add_option("--records", records_path)->required();
  c_compare->add_option("--inferences", inferences_path)->required();
  c_compare->add_option("--attribute", attribute)->check(
      CLI::IsMember({"gender", "ethnicity", "region", "birth_decade"}));
  c_compare->add_option("--collection", collection, "restrict name matching to one collection");

  // stats
  auto* c_stats = app.add_subcommand("stats", "proportions, Wilson intervals and outlier tests");
  c_stats->add_option("--records", records_path)->required();
  c_stats->add_option("--inferences", inferences_path)->required();
  std::optional<double> alpha;
  std::string family_size;
  std::optional<std::string> variance;
  c_stats->add_option("--alpha", alpha);
  c_stats->add_option("--family-size", family_size, "auto or a count");
  c_stats->add_option("--variance", variance)->check(CLI::IsMember({"pooled", "unpooled"}));

  // plan
  auto* c_plan = app.add_subcommand("plan", "sample size for a target margin of error");
  double moe = 0.033, confidence = 0.95, iia_rate = 1.0;
  std::optional<double> proportion;
  int stage1 = 0;
  c_plan->add_option("--moe", moe);
  c_plan->add_option("--confidence", confidence);
  c_plan->add_option("--iia-rate", iia_rate);
  c_plan->add_option("--proportion", proportion, "expected proportion (default 0.5)");
  c_plan->add_option("--stage1", stage1, "records already drawn in the pilot");

  // cluster
  auto* c_cluster = app.add_subcommand("cluster", "hierarchical clustering of collection profiles");
  std::string profiles_path, features = "missionA", linkage = "upgma", metric = "chebyshev";
  int k = 5;
  std::optional<std::string> cross_features;
  int cross_k = 3;
  c_cluster->add_option("--profiles", profiles_path, "percentage table, e.g. profiles.csv")->required();
  c_cluster->add_option("--features", features)->check(
      CLI::IsMember({"missionA", "missionB", "diversityA", "diversityB"}));
  c_cluster->add_option("--k", k);
  c_cluster->add_option("--linkage", linkage)->check(CLI::IsMember({"upgma", "wpgma"}));
  c_cluster->add_option("--metric", metric)->check(CLI::IsMember({"chebyshev"}));
  c_cluster->add_option("--cross-features", cross_features, "second feature set for a cross-tab");
  c_cluster->add_option("--cross-k", cross_k);

  // report / run
  auto* c_report = app.add_subcommand("report", "run every stage and emit tables and figure data");
  auto* c_run = app.add_subcommand("run", "run every stage, persisting each stage's outputs");
  for (auto* c : {c_report, c_run}) {
    add_input_flags(c, in);
    c->add_option("--repairs", in.paths.repairs, "approved repairs CSV");
    c->add_option("--collections", in.paths.collections, "collection_id,region,type CSV");
    c->add_option("--timestamp", timestamp, "recorded in the manifest");
  }

  // synth
  auto* c_synth = app.add_subcommand("synth", "generate a synthetic campaign with ground truth");
  std::string spec_path;
  c_synth->add_option("--spec", spec_path, "JSON spec (defaults when omitted)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 2;
  }

  try {
    PipelineConfig cfg;
    if (!g.config_path.empty()) cfg = PipelineConfig::load(g.config_path);
    auto out = [&](const std::string& name, const std::string& content) {
      pipeline::write_file(g.out_dir, name, content);
    };

    if (*c_ingest) {
      auto up = run_upstream(in, cfg, RegionMap::builtin(), Stage::Ingest);
      out("records.csv", ingest::records_to_csv(up.ingest.records));
      out("firms_dropped.csv", ingest::records_to_csv(up.ingest.dropped_firms));
      out("pool.csv", ingest::pool_to_csv(up.ingest.pool));
      fmt::print("{} records kept, {} firms dropped, {} responses, {} warnings\n", up.ingest.records.size(),
                 up.ingest.dropped_firms.size(), up.ingest.pool.total_responses(), up.ingest.warnings.size());
    } else if (*c_screen) {
      if (fast_cutoff) cfg.screening.fast_cutoff_secs = *fast_cutoff;
      if (volume) cfg.screening.volume_threshold = *volume;
      if (fast_frac) cfg.screening.fast_fraction_threshold = *fast_frac;
      if (agreement) cfg.screening.agreement_threshold = *agreement;
      auto regions = guarded(Stage::Ingest, [&] { return regions_for(in); });
      auto up = run_upstream(in, cfg, regions, Stage::Screen);
      out("worker_profiles.csv", screening::profiles_to_csv(up.screen->profiles));
      out("flagged_workers.csv", screening::exclusions_to_csv(up.screen->flagged));
      out("removal_report.json", screening::report_to_json(up.screen->screened.report));
      fmt::print("{} workers profiled, {} flagged, {} responses removed\n", up.screen->profiles.size(),
                 up.screen->flagged.worker_ids.size(), up.screen->screened.report.total);
    } else if (*c_infer) {
      auto regions = guarded(Stage::Ingest, [&] { return regions_for(in); });
      auto up = run_upstream(in, cfg, regions, Stage::Infer);
      out("inferences.csv", consensus::inferences_to_csv(up.infer->inferences));
      out("diagnostics.json", consensus::diagnostics_json(up.infer->inferences));
      out("coverage.csv", consensus::tallies_to_csv(up.infer->tallies));
      fmt::print("{} records inferred\n", up.infer->inferences.size());
    } else if (*c_reconcile) {
      auto regions = guarded(Stage::Ingest, [&] { return regions_for(in); });
      auto up = run_upstream(in, cfg, regions, Stage::Infer);
      auto rec = guarded(Stage::Reconcile, [&] {
        std::vector<reconcile::Repair> approved;
        if (!in.paths.repairs.empty()) approved = reconcile::parse_repairs_csv(pipeline::read_file(in.paths.repairs));
        return pipeline::run_reconcile(up.ingest.records, up.infer->inferences, approved);
      });
      out("consistency.json", reconcile::report_to_json(rec.consistency));
      out("repairs_proposed.csv", reconcile::repairs_to_csv(rec.proposals));
      out("repair_audit.csv", reconcile::audit_to_csv(rec.audit));
      out("inferences_reconciled.csv", consensus::inferences_to_csv(rec.inferences));
      fmt::print("{} duplicate identities, {} proposals, {} repairs applied\n", rec.groups.size(),
                 rec.proposals.size(), rec.audit.size());
    } else if (*c_compare) {
      auto cmp = guarded(Stage::Reconcile, [&] {
        auto records = load_kept_records(records_path);
        auto inferences = consensus::parse_inferences_csv(pipeline::read_file(inferences_path));
        auto reference = reconcile::parse_reference_csv(pipeline::read_file(reference_path));
        return reconcile::compare_reference(records, inferences, reference, *reconcile::parse_attribute(attribute),
                                            collection);
      });
      if (g.format == "json") {
        out("reference_comparison.json", reconcile::comparison_to_json(cmp));
      } else {
        out("reference_comparison.csv", reconcile::comparison_to_csv(cmp));
      }
      if (cmp.agreement_rate) {
        fmt::print("{} of {} labeled, sampled records agree ({:.1f}%)\n", cmp.agreements, cmp.labeled_sampled,
                   100 * *cmp.agreement_rate);
      } else {
        fmt::print("no labeled record was sampled\n");
      }
    } else if (*c_stats) {
      if (alpha) cfg.stats.alpha = *alpha;
      if (!family_size.empty()) cfg.set("family_size", family_size);
      if (variance) cfg.set("test_variance", *variance);
      auto report = guarded(Stage::Stats, [&] {
        auto records = load_kept_records(records_path);
        auto inferences = consensus::parse_inferences_csv(pipeline::read_file(inferences_path));
        return stats::compute_stats(stats::tabulate(records, inferences), cfg.stats);
      });
      if (g.format == "json") {
        out("stats.json", stats::stats_to_json(report));
      } else {
        out("stats.csv", stats::stats_to_csv(report));
      }
      out("profiles.csv", stats::profiles_to_csv(stats::to_profiles(report.table)));
      fmt::print("{} groups, {} estimates, {} outliers flagged\n", report.table.groups.size(),
                 report.estimates.size(),
                 std::count_if(report.outliers.begin(), report.outliers.end(),
                               [](const auto& o) { return o.direction != stats::Direction::NotSignificant; }));
    } else if (*c_plan) {
      auto plan = guarded(Stage::Stats, [&] {
        return stats::plan_sample({iia_rate, proportion, stage1}, moe, confidence);
      });
      if (g.format == "json") {
        out("plan.json", stats::plan_to_json(plan));
      } else {
        out("plan.csv", plan_to_csv(plan));
      }
      fmt::print("required IIA records {}, raw records {}, second-stage draw {}\n", plan.required_iia,
                 plan.required_raw, plan.stage2_draw);
    } else if (*c_cluster) {
      guarded(Stage::Cluster, [&] {
        auto profiles = stats::parse_profiles_csv(pipeline::read_file(profiles_path));
        auto vectors = cluster::build_features(profiles, parse_feature_set(features));
        auto tree = cluster::agglomerate(vectors, parse_linkage(linkage));
        auto part = cluster::cut(tree, k);
        out("features.csv", cluster::features_to_csv(vectors));
        out("dendrogram.json", cluster::dendrogram_to_json(tree));
        out("dendrogram.nwk", cluster::to_newick(tree));
        out("partition.csv", cluster::partition_to_csv(part));
        if (!tree.monotone()) fmt::print(stderr, "warning: dendrogram has height inversions\n");
        if (cross_features) {
          auto other = cluster::build_features(profiles, parse_feature_set(*cross_features));
          auto other_part = cluster::cut(cluster::agglomerate(other, parse_linkage(linkage)), cross_k);
          out("crosstab.csv", cluster::crosstab_to_csv(cluster::cross_tab(part, other_part)));
        }
        for (std::size_t c = 0; c < part.clusters.size(); ++c) {
          std::string members;
          for (const auto& m : part.clusters[c]) members += (members.empty() ? "" : " ") + m;
          fmt::print("{}: {}\n", c + 1, members);
        }
        return 0;
      });
    } else if (*c_report || *c_run) {
      pipeline::RunOptions opts;
      opts.inputs = in.paths;
      opts.config = cfg;
      opts.out_dir = g.out_dir;
      opts.confirm_flagged = in.confirm_flagged;
      opts.timestamp = timestamp;
      opts.seed = g.seed;
      auto run = pipeline::run_pipeline(opts);
      for (const auto& note : run.notes) fmt::print(stderr, "note: {}\n", note);
      fmt::print("wrote {}\n", g.out_dir);
    } else if (*c_synth) {
      guarded(Stage::Ingest, [&] {
        auto spec = synth::parse_spec_json(spec_path.empty() ? "{}" : pipeline::read_file(spec_path));
        spec.validate();
        auto campaign = synth::generate(spec, g.seed);
        out("records.csv", ingest::records_to_csv(campaign.records));
        out("responses.csv", ingest::responses_to_csv(campaign.responses));
        out("truth.csv", synth::truth_to_csv(campaign.truth));
        out("workers.csv", workers_csv(campaign));
        out("spec.json", synth::spec_to_json(spec));
        fmt::print("{} records, {} responses, {} workers\n", campaign.records.size(), campaign.responses.size(),
                   campaign.workers.size());
        return 0;
      });
    }
  } catch (const pipeline::StageFailure& e) {
    fmt::print(stderr, "error [{}]: {}\n", e.kind(), e.what());
    return e.exit_code();
  } catch (const ConfigError& e) {
    fmt::print(stderr, "error: {}\n", e.what());
    return 2;
  } catch (const std::exception& e) {
    fmt::print(stderr, "error: {}\n", e.what());
    return 1;
  }
  return 0;
}
