#pragma once

#include <map>
#include <string>
#include <string_view>

#include "crowdcensus/rational.hpp"

namespace crowdcensus {

enum class DecadeRounding { HalfDown, HalfUp };

/// Consensus thresholds.
/// Confidence weights are fixed at grade/3.
struct CampaignConfig {
  Rational gender_threshold{13, 20};     // |score| >= threshold
  Rational ethnicity_threshold{13, 20};  // score > threshold
  Rational region_threshold{4, 5};       // score >= threshold
  int min_support = 3;
  Rational z_cut{1};
  Rational typo_tolerance_years{1};
  DecadeRounding decade_rounding = DecadeRounding::HalfDown;

  /// Throws ConfigError when a field is out of range.
  void validate() const;
};

struct ScreeningConfig {
  double fast_cutoff_secs = 30;
  int volume_threshold = 500;
  double fast_fraction_threshold = 0.5;
  double agreement_threshold = 0.6;
};

enum class TestVariance { Pooled, Unpooled };

struct StatsConfig {
  double alpha = 0.05;
  int family_size = 0;  // 0 = number of groups
  TestVariance variance = TestVariance::Pooled;
  bool include_repaired = true;
};

enum class Linkage { Upgma, Wpgma };
enum class FeatureSet { MissionA, MissionB, DiversityA, DiversityB };

struct ClusterConfig {
  FeatureSet mission_features = FeatureSet::MissionA;
  int mission_k = 5;
  FeatureSet diversity_features = FeatureSet::DiversityA;
  int diversity_k = 3;
  Linkage linkage = Linkage::Upgma;
};

/// Every tunable of a pipeline run, loadable from a flat `key = value` file.
struct PipelineConfig {
  CampaignConfig campaign;
  ScreeningConfig screening;
  StatsConfig stats;
  ClusterConfig cluster;

  /// Applies one key. Throws ConfigError on an unknown key or bad value.
  void set(std::string_view key, std::string_view value);
  /// All keys with their current values, sorted by key.
  std::map<std::string, std::string> to_map() const;
  std::string to_text() const;

  static PipelineConfig parse(std::string_view text);
  static PipelineConfig load(const std::string& path);
};

std::string_view to_token(FeatureSet f);
std::string_view to_token(Linkage l);
FeatureSet parse_feature_set(std::string_view token);
Linkage parse_linkage(std::string_view token);

}  // namespace crowdcensus
