#pragma once

#include <array>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "crowdcensus/config.hpp"
#include "crowdcensus/ingest.hpp"
#include "crowdcensus/rational.hpp"
#include "crowdcensus/region_map.hpp"
#include "crowdcensus/types.hpp"

namespace crowdcensus::consensus {

using Responses = std::span<const AnnotationResponse>;

enum class IiaVerdict { Iia, NonIia, Undetermined };

/// Why an attribute did or did not receive an inference.
enum class Status {
  Inferred,
  BelowThreshold,
  InsufficientSupport,
  NoUsableResponses,
  Ambiguous,      // more than one category qualified
  NotApplicable,  // record is not IIA
};

std::string_view to_token(IiaVerdict v);
std::string_view to_token(Status s);
std::optional<IiaVerdict> parse_iia_verdict(std::string_view token);

struct IiaResult {
  IiaVerdict verdict = IiaVerdict::Undetermined;
  int yes = 0;
  int total = 0;
  /// Responses kept for attribute analysis: dissenting "no" answers are
  /// removed when the verdict is IIA.
  std::vector<AnnotationResponse> retained;
};

/// IIA iff at least min_support responses and strictly more than half say yes.
IiaResult infer_iia(Responses responses, const CampaignConfig& config);

struct GenderInference {
  std::optional<Gender> value;
  std::optional<Rational> score;  // absent when no usable answers
  int support = 0;
  Status status = Status::NotApplicable;
};

/// Mean of (-1 man, +1 woman) x confidence weight over man/woman answers;
/// every other answer is dropped first. Throws NoUsableResponses when
/// nothing remains.
Rational gender_score(Responses responses);
GenderInference infer_gender(Responses responses, const CampaignConfig& config);

struct EthnicityInference {
  std::optional<EthnicityGroup> value;
  bool multiple_excluded = false;
  std::array<Rational, kNumEthnicityGroups> scores{};
  std::array<int, kNumEthnicityGroups> counts{};  // responses selecting each group
  int support = 0;                                // responses with a list answer
  Status status = Status::NotApplicable;
};

/// Per-group confidence-weighted selection share. Free text is ignored and
/// the rare census categories fold into Other. Throws NoUsableResponses.
std::array<Rational, kNumEthnicityGroups> ethnicity_scores(Responses responses);
/// A group is inferred when its score exceeds the threshold strictly and at
/// least min_support responses select it; two or more qualifying groups
/// exclude the record.
EthnicityInference infer_ethnicity(Responses responses, const CampaignConfig& config);

struct RegionInference {
  std::optional<Region> value;
  std::array<Rational, kNumRegions> scores{};
  std::array<int, kNumRegions> counts{};
  int support = 0;  // answers that resolved to a region
  std::vector<std::string> unknown_countries;
  Status status = Status::NotApplicable;
};

/// A region is inferred when its score is at least the threshold and at
/// least min_support answers map to it. Unresolvable countries are dropped
/// and listed, never fatal.
RegionInference infer_region(Responses responses, const RegionMap& regions, const CampaignConfig& config);

struct BirthInference {
  std::optional<int> decade;
  std::optional<Rational> weighted_mean;
  int parsed = 0;   // answers that were 3- or 4-digit years
  int support = 0;  // answers left after outlier removal
  std::vector<int> discarded;
  Status status = Status::NotApplicable;
};

/// Answers that are 3- or 4-digit integers, as years.
std::optional<int> parse_birth_year(std::string_view raw);
/// Rounds to a multiple of ten; exact halves go down (1835 -> 1830) or up.
int round_to_decade(const Rational& year, DecadeRounding rounding);
/// Discards |z| > z_cut unless within the typo tolerance of the mean (z from
/// the unweighted mean and population deviation; nothing is discarded when
/// n <= 2 or the deviation is zero), then rounds the confidence-weighted mean
/// of the remainder when at least min_support answers remain.
BirthInference infer_birth_decade(Responses responses, const CampaignConfig& config);

struct ConsensusInference {
  RecordKey key;
  IiaVerdict iia = IiaVerdict::Undetermined;
  int n_responses = 0;
  int iia_yes = 0;
  GenderInference gender;
  EthnicityInference ethnicity;
  RegionInference region;
  BirthInference birth;
  /// Bit set of attributes changed by an approved repair (see reconcile).
  unsigned repaired_mask = 0;
  /// Non-fatal per-record problems (unknown countries and the like).
  std::vector<std::string> diagnostics;

  bool has_ethnicity() const { return ethnicity.value.has_value() && !ethnicity.multiple_excluded; }
};

ConsensusInference infer_record(const ingest::PoolEntry& entry, const RegionMap& regions,
                                const CampaignConfig& config);

/// Per-record inference for every pool entry, in canonical record order.
/// Records are processed in parallel; output does not depend on scheduling.
std::vector<ConsensusInference> run_consensus(const ingest::ResponsePool& pool, const RegionMap& regions,
                                              const CampaignConfig& config);

namespace serial {
/// Single-threaded reference for run_consensus.
std::vector<ConsensusInference> run_consensus(const ingest::ResponsePool& pool, const RegionMap& regions,
                                              const CampaignConfig& config);
}  // namespace serial

/// Per-collection counts in the shape of the coverage table. `sampled` counts
/// records that were deployed (had any response before screening).
struct CollectionTally {
  std::string collection_id;
  int sampled = 0;
  int iia = 0;
  int cgi = 0;
  int cei = 0;
  int cri = 0;
  int cbi = 0;
};

/// One row per collection (sorted) followed by an "Overall" row of sums.
std::vector<CollectionTally> tally_collections(const ingest::ResponsePool& deployed,
                                               const std::vector<ConsensusInference>& inferences);

inline constexpr std::string_view kInferencesHeader =
    "collection_id,entity_id,iia,gender,gender_score,ethnicity,region,birth_decade,n_gender,n_ethnicity,n_region,"
    "n_birth";

std::string inferences_to_csv(const std::vector<ConsensusInference>& inferences);
/// Reads the CSV form back. Per-category score arrays are not part of the
/// file and come back zeroed.
std::vector<ConsensusInference> parse_inferences_csv(std::string_view csv_text);
std::string tallies_to_csv(const std::vector<CollectionTally>& tallies);
/// Per-record diagnostics and attribute statuses as a JSON document.
std::string diagnostics_json(const std::vector<ConsensusInference>& inferences);

}  // namespace crowdcensus::consensus
