#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "crowdcensus/region_map.hpp"
#include "crowdcensus/report.hpp"

namespace crowdcensus::pipeline {

enum class Stage { Ingest, Screen, Infer, Reconcile, Stats, Cluster, Report };
std::string_view to_token(Stage s);
/// 10 + stage index: ingest 10 ... report 16.
int exit_code(Stage s);

/// A stage error, carrying the stage and the underlying error kind.
class StageFailure : public std::runtime_error {
 public:
  StageFailure(Stage stage, std::string kind, const std::string& message);
  Stage stage() const { return stage_; }
  const std::string& kind() const { return kind_; }
  int exit_code() const { return pipeline::exit_code(stage_); }

 private:
  Stage stage_;
  std::string kind_;
};

struct RunOptions {
  report::PipelineInputs inputs;
  PipelineConfig config;
  std::string out_dir;
  /// Screening flags are advisory; only with this set are flagged workers
  /// excluded alongside the manual list.
  bool confirm_flagged = false;
  std::optional<std::string> timestamp;
  std::uint64_t seed = 0;
};

// Stage bodies, shared by the `run` command and the per-stage subcommands.
report::IngestOutput run_ingest(const std::string& records_path, const std::string& responses_path);
report::ScreenOutput run_screen(const ingest::ResponsePool& pool, std::vector<screening::ExclusionList> manual,
                                const PipelineConfig& config, const RegionMap& regions, bool confirm_flagged);
report::InferOutput run_infer(const ingest::ResponsePool& deployed, const ingest::ResponsePool& screened,
                              const RegionMap& regions, const CampaignConfig& config);
report::ReconcileOutput run_reconcile(const std::vector<EntityRecord>& records,
                                      const std::vector<consensus::ConsensusInference>& inferences,
                                      const std::vector<reconcile::Repair>& approved);
/// Clusters collections. A k larger than the number of groups is clamped and
/// noted.
report::ClusterOutput run_cluster(const std::vector<stats::GroupProfile>& profiles, const ClusterConfig& config,
                                  std::vector<std::string>& notes);

/// Runs every stage in order and persists each stage's files into out_dir as
/// soon as it completes. Throws StageFailure naming the failing stage.
report::PipelineRun run_pipeline(const RunOptions& options);

/// Writes `content` to dir/name, creating dir when needed.
void write_file(const std::string& dir, const std::string& name, const std::string& content);
std::string read_file(const std::string& path);

}  // namespace crowdcensus::pipeline
