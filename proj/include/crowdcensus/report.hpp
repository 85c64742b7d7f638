#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "crowdcensus/cluster.hpp"
#include "crowdcensus/config.hpp"
#include "crowdcensus/consensus.hpp"
#include "crowdcensus/ingest.hpp"
#include "crowdcensus/reconcile.hpp"
#include "crowdcensus/screening.hpp"
#include "crowdcensus/stats.hpp"

namespace crowdcensus::report {

/// Optional per-collection metadata for the coverage table.
struct CollectionInfo {
  std::string region;  // e.g. census region of the institution
  std::string type;    // funding model
};

std::map<std::string, CollectionInfo> parse_collections_csv(std::string_view csv_text);

struct PipelineInputs {
  std::string records;
  std::string responses;
  std::string exclusions;   // optional
  std::string repairs;      // optional, approved repairs
  std::string collections;  // optional metadata
  std::string region_map;   // optional, builtin table when empty
};

struct IngestOutput {
  std::vector<EntityRecord> all_records;  // as scraped, canonical order
  std::vector<EntityRecord> records;      // after the firm pre-filter
  std::vector<EntityRecord> dropped_firms;
  std::vector<ingest::IngestWarning> warnings;
  ingest::ResponsePool pool;  // before screening
};

struct ScreenOutput {
  std::vector<screening::WorkerProfile> profiles;
  screening::ExclusionList flagged;
  std::vector<screening::ExclusionList> applied;
  screening::ScreenedPool screened;
};

struct InferOutput {
  std::vector<consensus::ConsensusInference> inferences;
  std::vector<consensus::CollectionTally> tallies;
};

struct ReconcileOutput {
  std::vector<reconcile::IdentityGroup> groups;
  reconcile::ConsistencyReport consistency;
  std::vector<reconcile::Repair> proposals;
  std::vector<reconcile::AuditRow> audit;
  std::vector<consensus::ConsensusInference> inferences;  // after approved repairs
};

struct ClusterRun {
  FeatureSet features = FeatureSet::MissionA;
  int requested_k = 0;
  std::vector<cluster::FeatureVector> vectors;
  cluster::Dendrogram dendrogram;
  cluster::Partition partition;
};

struct ClusterOutput {
  std::vector<stats::GroupProfile> profiles;
  ClusterRun mission;
  ClusterRun diversity;
  cluster::CrossTab crosstab;
};

/// Everything a run produced. Stages that did not run stay empty.
struct PipelineRun {
  PipelineInputs inputs;
  PipelineConfig config;
  std::optional<std::string> timestamp;
  std::string version;
  std::uint64_t seed = 0;
  std::map<std::string, CollectionInfo> collections;
  std::vector<std::string> notes;  // skipped stages, clamped settings

  std::optional<IngestOutput> ingest;
  std::optional<ScreenOutput> screen;
  std::optional<InferOutput> infer;
  std::optional<ReconcileOutput> reconcile;
  std::optional<stats::StatsReport> stats;
  std::optional<ClusterOutput> cluster;
};

struct RenderedTable {
  std::string csv;
  std::string text;  // aligned columns for terminals
};

/// Coverage table: group, collection, region, type, date, scraped, sampled,
/// IIA, CGI, CEI, CRI, CBI, then the five percentage columns. Needs the
/// infer stage; throws StageMissing otherwise.
RenderedTable emit_table1(const PipelineRun& run);

/// Diversity table: % and CI per category with the outlier flag, one row per
/// collection plus the unique-entity Overall row. Needs the stats stage.
RenderedTable emit_table2(const PipelineRun& run);

/// Scatter and cross-tab series for the mission/diversity figure. Needs the
/// cluster stage.
std::string emit_fig2_data(const PipelineRun& run);
std::string emit_fig2_svg(const PipelineRun& run);

/// Deterministic summary of a run: inputs, config snapshot, stage counts and
/// the files written.
std::string manifest_json(const PipelineRun& run, const std::vector<std::string>& outputs);

}  // namespace crowdcensus::report
