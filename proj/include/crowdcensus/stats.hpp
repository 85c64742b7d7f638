#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "crowdcensus/config.hpp"
#include "crowdcensus/consensus.hpp"
#include "crowdcensus/types.hpp"

namespace crowdcensus::stats {

struct Interval {
  double low = 0;
  double high = 0;
};

/// Wilson score interval at critical value Φ⁻¹(1 − alpha/2), clamped to [0,1].
Interval wilson_ci(int k, int n, double alpha);

struct ProportionEstimate {
  std::string group;
  std::string category;
  int k = 0;
  int n = 0;
  double p_hat = 0;
  double ci_low = 0;
  double ci_high = 1;
  double alpha_effective = 0;
};

ProportionEstimate estimate(std::string group, std::string category, int k, int n, double alpha);

/// Recomputes every interval at alpha/m. m defaults to the family size.
std::vector<ProportionEstimate> simultaneous_cis(std::vector<ProportionEstimate> family, double alpha,
                                                 int m = 0);

enum class Direction { Higher, Lower, NotSignificant };
std::string_view to_token(Direction d);
std::optional<Direction> parse_direction(std::string_view token);

struct GroupCount {
  std::string group;
  int k = 0;
  int n = 0;
};

struct OutlierResult {
  std::string group;
  std::string category;
  Direction direction = Direction::NotSignificant;
  double z = 0;
  double raw_p = 1;
  double adjusted_p = 1;
  double pool_rest = 0;  // proportion of all other groups combined
  std::string note;      // "degenerate" when the test has no variance
};

/// Each group against the pool of the others, two-sided, Bonferroni over
/// `family_size` tests (0 = number of groups). Results follow input order.
std::vector<OutlierResult> leave_one_out_tests(const std::string& category, std::span<const GroupCount> counts,
                                               double alpha, TestVariance variance = TestVariance::Pooled,
                                               int family_size = 0);

struct PilotSummary {
  double iia_rate = 1;
  std::optional<double> proportion;  // worst case 0.5 when absent
  int stage1_draw = 0;
};

struct SamplePlan {
  double target_moe = 0;
  double confidence = 0;
  double iia_rate = 0;
  double proportion = 0;
  int required_iia = 0;
  int required_raw = 0;
  int stage2_draw = 0;
};

SamplePlan plan_sample(const PilotSummary& pilot, double target_moe, double confidence);
std::string plan_to_json(const SamplePlan& plan);

/// Diversity categories in table order, then the seven regions.
inline constexpr std::array<std::string_view, 6> kDiversityCategories = {"women", "asian", "black",
                                                                          "hispanic", "white", "other"};
std::vector<std::string> region_categories();

struct CategoryCount {
  int k = 0;
  int n = 0;
};

struct GroupRow {
  std::string group;
  std::map<std::string, CategoryCount> counts;
  int unique_entities = 0;
  int n_birth = 0;
  std::optional<double> avg_birth_year;  // mean of decade-rounded years
};

struct DemographicTable {
  std::vector<GroupRow> groups;  // sorted by group
  GroupRow overall;
};

/// Counts confident inferences of IIA records. Records sharing a normalized
/// name count once, within a collection for the per-group rows and across
/// collections for the overall row. An identity whose linked records disagree
/// on an attribute is left out of that attribute's counts.
DemographicTable tabulate(const std::vector<EntityRecord>& records,
                          const std::vector<consensus::ConsensusInference>& inferences);

/// The overall row alone.
GroupRow pooled_unique_proportions(const std::vector<EntityRecord>& records,
                                   const std::vector<consensus::ConsensusInference>& inferences);

struct StatsReport {
  double alpha = 0.05;
  int family_size = 0;
  TestVariance variance = TestVariance::Pooled;
  std::vector<ProportionEstimate> estimates;  // per group, Bonferroni per category family
  std::vector<ProportionEstimate> overall;    // unadjusted
  std::vector<OutlierResult> outliers;        // diversity categories only
  DemographicTable table;

  const OutlierResult* outlier(const std::string& group, const std::string& category) const;
  const ProportionEstimate* find(const std::string& group, const std::string& category) const;
};

StatsReport compute_stats(const DemographicTable& table, const StatsConfig& config);

/// Per-group fractions by coordinate name ("women", "europe", ...) plus
/// "avg_birth_year" in years.
struct GroupProfile {
  std::string group;
  std::map<std::string, double> values;
};

std::vector<GroupProfile> to_profiles(const DemographicTable& table);
/// Reads the percentage layout (`group,women_pct,...,avg_birth_year`) and
/// converts percentages to fractions. Blank cells are left out.
std::vector<GroupProfile> parse_profiles_csv(std::string_view csv_text);
std::string profiles_to_csv(const std::vector<GroupProfile>& profiles);

inline constexpr std::string_view kStatsHeader =
    "group,category,k,n,p_hat,ci_low,ci_high,alpha_effective,direction,raw_p,adjusted_p";
std::string stats_to_csv(const StatsReport& report);
std::string stats_to_json(const StatsReport& report);
/// Reads stats.csv back. The demographic table is not restored.
StatsReport parse_stats_csv(std::string_view csv_text);

struct CoverageResult {
  int replicates = 0;
  int covered = 0;
  double rate = 0;
};

/// Share of replicates, k ~ Binomial(n, p), whose Wilson interval covers p.
CoverageResult wilson_coverage(int n, double p, double alpha, int replicates, std::uint64_t seed);

struct FamilywiseResult {
  int replicates = 0;
  int any_rejection = 0;
  double rate = 0;
  bool adjusted_never_below_raw = true;
};

/// Null simulation: every group draws from the same p, so any flagged group
/// is a false positive.
FamilywiseResult null_familywise(int groups, int n_per_group, double p, double alpha, int replicates,
                                 std::uint64_t seed, TestVariance variance = TestVariance::Pooled);

namespace serial {
CoverageResult wilson_coverage(int n, double p, double alpha, int replicates, std::uint64_t seed);
FamilywiseResult null_familywise(int groups, int n_per_group, double p, double alpha, int replicates,
                                 std::uint64_t seed, TestVariance variance = TestVariance::Pooled);
}  // namespace serial

}  // namespace crowdcensus::stats
