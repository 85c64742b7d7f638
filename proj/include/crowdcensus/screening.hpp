#pragma once

#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "crowdcensus/config.hpp"
#include "crowdcensus/ingest.hpp"
#include "crowdcensus/region_map.hpp"

namespace crowdcensus::screening {

struct WorkerProfile {
  std::string worker_id;
  int n_responses = 0;
  double median_duration_secs = 0;
  double mean_duration_secs = 0;
  double fast_fraction = 0;  // share of responses with duration <= cutoff
  std::optional<double> consensus_agreement;
};

enum class Provenance { Manual, Flagged };

struct ExclusionList {
  std::set<std::string> worker_ids;
  Provenance provenance = Provenance::Manual;
};

/// One profile per worker, sorted by descending volume then worker id.
std::vector<WorkerProfile> profile_workers(const ingest::ResponsePool& pool, double fast_cutoff_secs);

namespace serial {
std::vector<WorkerProfile> profile_workers(const ingest::ResponsePool& pool, double fast_cutoff_secs);
}  // namespace serial

/// Fills consensus_agreement: the share of a worker's comparable answers
/// (IIA, gender, ethnicity, region, birth decade) matching a provisional
/// consensus computed only from workers below the volume gate. Workers under
/// review never score against themselves.
void score_agreement(std::vector<WorkerProfile>& profiles, const ingest::ResponsePool& pool,
                     const RegionMap& regions, const CampaignConfig& campaign, int volume_threshold);

/// Flags n >= volume AND (fast_fraction >= fast threshold OR agreement <
/// agreement threshold, when known). Advisory: exclusion needs confirmation.
ExclusionList flag_suspects(const std::vector<WorkerProfile>& profiles, const ScreeningConfig& thresholds);

struct RemovalReport {
  std::map<std::string, int> per_worker;
  std::map<RecordKey, int> per_record;
  int total = 0;
};

struct ScreenedPool {
  ingest::ResponsePool pool;
  RemovalReport report;
};

/// Drops every response by a listed worker. Other responses are untouched.
ScreenedPool apply_exclusions(const ingest::ResponsePool& pool, const std::vector<ExclusionList>& lists);

std::string profiles_to_csv(const std::vector<WorkerProfile>& profiles);
std::string exclusions_to_csv(const ExclusionList& list);
/// Reads `worker_id,provenance`. Rows may mix provenances; each provenance
/// becomes its own list.
std::vector<ExclusionList> parse_exclusions_csv(std::string_view csv_text);
std::string report_to_json(const RemovalReport& report);

}  // namespace crowdcensus::screening
