#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "crowdcensus/config.hpp"
#include "crowdcensus/consensus.hpp"
#include "crowdcensus/types.hpp"

namespace crowdcensus::synth {

struct CollectionSpec {
  std::string id;
  int records = 100;
  double woman_rate = 0.15;
  std::array<double, kNumEthnicityGroups> ethnicity = {0.09, 0.012, 0.028, 0.855, 0.015};
  std::array<double, kNumRegions> region = {0.004, 0.087, 0.44, 0.021, 0.447, 0.001, 0.0};
  double birth_mean = 1860;
  double birth_sd = 70;
};

struct WorldSpec {
  std::vector<CollectionSpec> collections;
  double iia_rate = 0.88;
  double duplicate_rate = 0.0;  // chance a record reuses an entity of an earlier collection
  double firm_rate = 0.0;       // records named like firms; never deployed
  double deploy_rate = 1.0;     // records that receive responses
};

struct ArchetypeSpec {
  int count = 0;
  double accuracy = 1.0;
  double volume_weight = 1.0;  // relative share of assignments per worker
};

struct WorkerSpec {
  ArchetypeSpec honest{20, 1.0, 1.0};
  ArchetypeSpec sloppy{0, 0.7, 1.0};
  ArchetypeSpec spammer{0, 0.0, 1.0};
  int responses_per_record = 5;
  double birth_sigma = 0;  // Gaussian noise on honest birth-year answers
  double typo_rate = 0;    // chance of an extra +-1 year slip
};

struct SynthSpec {
  WorldSpec world;
  WorkerSpec workers;

  /// Throws InvalidSpec when a rate or distribution is out of range.
  void validate() const;
};

/// JSON with optional "world" and "workers" objects. "collections" may be a
/// count (sharing the top-level distributions) or a list of objects.
SynthSpec parse_spec_json(std::string_view json_text);
std::string spec_to_json(const SynthSpec& spec);

enum class Archetype { Honest, Sloppy, Spammer };
std::string_view to_token(Archetype a);

struct TruthRow {
  RecordKey key;
  bool iia = false;
  std::optional<Gender> gender;
  std::optional<EthnicityGroup> ethnicity;
  std::optional<Region> region;
  std::optional<int> birth_year;
};

struct Campaign {
  std::vector<EntityRecord> records;
  std::vector<AnnotationResponse> responses;  // canonical order
  std::vector<TruthRow> truth;                // record order
  std::map<std::string, Archetype> workers;
};

/// Deterministic in (spec, seed). Each record draws from its own derived
/// stream, so the world does not depend on the worker population and
/// responses do not depend on scheduling.
Campaign generate(const SynthSpec& spec, std::uint64_t seed);

namespace serial {
Campaign generate(const SynthSpec& spec, std::uint64_t seed);
}  // namespace serial

inline constexpr std::string_view kTruthHeader = "collection_id,entity_id,iia,gender,ethnicity,region,birth_year";
std::string truth_to_csv(const std::vector<TruthRow>& truth);
std::vector<TruthRow> parse_truth_csv(std::string_view csv_text);

struct AttributeScore {
  std::string attribute;
  int eligible = 0;  // truth applies and the record met min_support
  int inferred = 0;
  int correct = 0;
  std::optional<double> accuracy;  // correct / inferred
  double coverage = 0;             // inferred / eligible
  std::map<std::pair<std::string, std::string>, int> confusion;  // (truth, inferred or "none")
};

struct TruthReport {
  std::vector<AttributeScore> attributes;  // iia, gender, ethnicity, region, birth_decade

  const AttributeScore& get(std::string_view attribute) const;
  /// Pooled over the four demographic attributes.
  std::optional<double> overall_accuracy() const;
};

/// Throws KeyMismatch for an inference with no truth row. Truth rows with no
/// inference count as not inferred.
TruthReport score_against_truth(const std::vector<consensus::ConsensusInference>& inferences,
                                const std::vector<TruthRow>& truth, const CampaignConfig& config);
std::string truth_report_to_json(const TruthReport& report);

}  // namespace crowdcensus::synth
