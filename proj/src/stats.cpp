#include "crowdcensus/stats.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>

#include <fmt/format.h>

#include "json.hpp"

#include "crowdcensus/csv.hpp"
#include "crowdcensus/error.hpp"
#include "crowdcensus/normal.hpp"
#include "crowdcensus/random.hpp"
#include "crowdcensus/reconcile.hpp"

namespace crowdcensus::stats {
namespace {

using consensus::ConsensusInference;
constexpr std::string_view kOverall = "Overall";

std::string num(double v) { return fmt::format("{:.10g}", v); }

// Agreed value across linked records; nullopt when absent everywhere or in
// conflict.
template <typename T, typename Get>
std::optional<T> agreed(const std::vector<const ConsensusInference*>& members, Get get) {
  std::optional<T> value;
  for (const auto* inf : members) {
    std::optional<T> v = get(*inf);
    if (!v) continue;
    if (value && *value != *v) return std::nullopt;
    value = v;
  }
  return value;
}

void add_entity(GroupRow& row, const std::vector<const ConsensusInference*>& members, long long& birth_sum) {
  ++row.unique_entities;
  auto gender = agreed<Gender>(members, [](const ConsensusInference& i) { return i.gender.value; });
  if (gender) {
    auto& c = row.counts["women"];
    ++c.n;
    c.k += *gender == Gender::Woman ? 1 : 0;
  }
  auto eth = agreed<EthnicityGroup>(members, [](const ConsensusInference& i) {
    return i.has_ethnicity() ? i.ethnicity.value : std::nullopt;
  });
  if (eth) {
    for (auto g : kAllEthnicityGroups) {
      auto& c = row.counts[std::string(to_token(g))];
      ++c.n;
      c.k += *eth == g ? 1 : 0;
    }
  }
  auto region = agreed<Region>(members, [](const ConsensusInference& i) { return i.region.value; });
  if (region) {
    for (auto r : kAllRegions) {
      auto& c = row.counts[std::string(to_token(r))];
      ++c.n;
      c.k += *region == r ? 1 : 0;
    }
  }
  auto decade = agreed<int>(members, [](const ConsensusInference& i) { return i.birth.decade; });
  if (decade) {
    ++row.n_birth;
    birth_sum += *decade;
  }
}

void init_counts(GroupRow& row) {
  for (auto c : kDiversityCategories) row.counts[std::string(c)];
  for (const auto& c : region_categories()) row.counts[c];
}

void finish_birth(GroupRow& row, long long sum) {
  if (row.n_birth > 0) row.avg_birth_year = static_cast<double>(sum) / row.n_birth;
}

struct Linked {
  std::map<std::pair<std::string, std::string>, std::vector<const ConsensusInference*>> per_group;
  std::map<std::string, std::vector<const ConsensusInference*>> overall;
};

Linked link(const std::vector<EntityRecord>& records, const std::vector<ConsensusInference>& inferences) {
  std::map<RecordKey, const EntityRecord*> by_key;
  for (const auto& r : records) by_key[r.key] = &r;
  Linked out;
  for (const auto& inf : inferences) {
    if (inf.iia != consensus::IiaVerdict::Iia) continue;
    auto it = by_key.find(inf.key);
    std::string identity = it == by_key.end() ? "" : reconcile::normalize_name(it->second->display_name);
    if (identity.empty()) identity = "\x01" + inf.key.to_string();
    out.per_group[{inf.key.collection_id, identity}].push_back(&inf);
    out.overall[identity].push_back(&inf);
  }
  return out;
}

GroupRow overall_row(const Linked& linked) {
  GroupRow row;
  row.group = std::string(kOverall);
  init_counts(row);
  long long sum = 0;
  for (const auto& [identity, members] : linked.overall) add_entity(row, members, sum);
  finish_birth(row, sum);
  return row;
}

OutlierResult test_one(const std::string& category, const GroupCount& g, int k_rest, int n_rest, double alpha, int m,
                       TestVariance variance) {
  OutlierResult r;
  r.group = g.group;
  r.category = category;
  double p1 = static_cast<double>(g.k) / g.n;
  double p2 = static_cast<double>(k_rest) / n_rest;
  r.pool_rest = p2;
  double se;
  if (variance == TestVariance::Pooled) {
    double pp = static_cast<double>(g.k + k_rest) / (g.n + n_rest);
    se = std::sqrt(pp * (1 - pp) * (1.0 / g.n + 1.0 / n_rest));
  } else {
    se = std::sqrt(p1 * (1 - p1) / g.n + p2 * (1 - p2) / n_rest);
  }
  if (!(se > 0)) {
    r.note = "degenerate";
    return r;
  }
  r.z = (p1 - p2) / se;
  r.raw_p = std::min(1.0, 2 * normal::sf(std::abs(r.z)));
  r.adjusted_p = std::min(1.0, r.raw_p * m);
  if (r.adjusted_p < alpha) r.direction = r.z > 0 ? Direction::Higher : Direction::Lower;
  return r;
}

bool covers(int k, int n, double p, double alpha) {
  Interval ci = wilson_ci(k, n, alpha);
  return ci.low <= p && p <= ci.high;
}

bool any_rejection(int groups, int n, double p, double alpha, std::uint64_t seed, TestVariance variance,
                   bool& adjusted_ok) {
  std::mt19937_64 rng(seed);
  std::binomial_distribution<int> draw(n, p);
  std::vector<GroupCount> counts(groups);
  for (int g = 0; g < groups; ++g) counts[g] = {std::to_string(g), draw(rng), n};
  bool any = false;
  for (const auto& r : leave_one_out_tests("c", counts, alpha, variance)) {
    any = any || r.direction != Direction::NotSignificant;
    adjusted_ok = adjusted_ok && r.adjusted_p >= r.raw_p && r.adjusted_p <= 1;
  }
  return any;
}

}  // namespace

Interval wilson_ci(int k, int n, double alpha) {
  if (n < 1 || k < 0 || k > n) throw InvalidInput(fmt::format("wilson_ci needs 0 <= k <= n, n >= 1 (k={}, n={})", k, n));
  double z = normal::critical_value(alpha);
  double p = static_cast<double>(k) / n;
  double z2n = z * z / n;
  double denom = 1 + z2n;
  double center = (p + z2n / 2) / denom;
  double half = z * std::sqrt(p * (1 - p) / n + z2n / (4.0 * n)) / denom;
  Interval ci{std::max(0.0, center - half), std::min(1.0, center + half)};
  if (k == 0) ci.low = 0;
  if (k == n) ci.high = 1;
  return ci;
}

ProportionEstimate estimate(std::string group, std::string category, int k, int n, double alpha) {
  Interval ci = wilson_ci(k, n, alpha);
  return {std::move(group), std::move(category), k, n, static_cast<double>(k) / n, ci.low, ci.high, alpha};
}

std::vector<ProportionEstimate> simultaneous_cis(std::vector<ProportionEstimate> family, double alpha, int m) {
  if (m <= 0) m = static_cast<int>(family.size());
  if (m < 1) return family;
  for (auto& e : family) e = estimate(e.group, e.category, e.k, e.n, alpha / m);
  return family;
}

std::string_view to_token(Direction d) {
  switch (d) {
    case Direction::Higher: return "higher";
    case Direction::Lower: return "lower";
    case Direction::NotSignificant: return "none";
  }
  return "?";
}

std::optional<Direction> parse_direction(std::string_view t) {
  if (t == "higher") return Direction::Higher;
  if (t == "lower") return Direction::Lower;
  if (t == "none") return Direction::NotSignificant;
  return std::nullopt;
}

std::vector<OutlierResult> leave_one_out_tests(const std::string& category, std::span<const GroupCount> counts,
                                               double alpha, TestVariance variance, int family_size) {
  if (counts.size() < 2) throw InvalidInput("leave-one-out tests need at least two groups");
  if (!(alpha > 0 && alpha < 1)) throw InvalidInput("alpha must lie in (0,1)");
  long long k_total = 0, n_total = 0;
  for (const auto& g : counts) {
    if (g.n < 1 || g.k < 0 || g.k > g.n) throw InvalidInput("group " + g.group + " has invalid counts");
    k_total += g.k;
    n_total += g.n;
  }
  int m = family_size > 0 ? family_size : static_cast<int>(counts.size());
  std::vector<OutlierResult> out;
  out.reserve(counts.size());
  for (const auto& g : counts) {
    out.push_back(test_one(category, g, static_cast<int>(k_total - g.k), static_cast<int>(n_total - g.n), alpha, m,
                           variance));
  }
  return out;
}

SamplePlan plan_sample(const PilotSummary& pilot, double target_moe, double confidence) {
  if (!(pilot.iia_rate > 0 && pilot.iia_rate <= 1)) throw InvalidInput("IIA rate must lie in (0,1]");
  if (!(target_moe > 0 && target_moe < 0.5)) throw InvalidInput("margin of error must lie in (0,0.5)");
  if (!(confidence > 0 && confidence < 1)) throw InvalidInput("confidence must lie in (0,1)");
  double p = pilot.proportion.value_or(0.5);
  if (!(p > 0 && p < 1)) throw InvalidInput("pilot proportion must lie in (0,1)");
  if (pilot.stage1_draw < 0) throw InvalidInput("stage-1 draw must be non-negative");

  double z = normal::critical_value(1 - confidence);
  SamplePlan plan;
  plan.target_moe = target_moe;
  plan.confidence = confidence;
  plan.iia_rate = pilot.iia_rate;
  plan.proportion = p;
  // The slack keeps exact integers from rounding up on representation error.
  plan.required_iia = static_cast<int>(std::ceil(z * z * p * (1 - p) / (target_moe * target_moe) - 1e-9));
  plan.required_raw = static_cast<int>(std::ceil(plan.required_iia / pilot.iia_rate - 1e-9));
  plan.stage2_draw = std::max(0, plan.required_raw - pilot.stage1_draw);
  return plan;
}

std::string plan_to_json(const SamplePlan& plan) {
  nlohmann::ordered_json j;
  j["target_moe"] = plan.target_moe;
  j["confidence"] = plan.confidence;
  j["iia_rate"] = plan.iia_rate;
  j["proportion"] = plan.proportion;
  j["required_iia"] = plan.required_iia;
  j["required_raw"] = plan.required_raw;
  j["stage2_draw"] = plan.stage2_draw;
  return j.dump(2) + "\n";
}

std::vector<std::string> region_categories() {
  std::vector<std::string> out;
  for (auto r : kAllRegions) out.emplace_back(to_token(r));
  return out;
}

DemographicTable tabulate(const std::vector<EntityRecord>& records, const std::vector<ConsensusInference>& inferences) {
  Linked linked = link(records, inferences);
  DemographicTable table;
  std::map<std::string, std::pair<GroupRow, long long>> rows;
  for (const auto& inf : inferences) {
    auto& [row, sum] = rows[inf.key.collection_id];
    if (row.group.empty()) {
      row.group = inf.key.collection_id;
      init_counts(row);
    }
  }
  for (const auto& [key, members] : linked.per_group) {
    auto& [row, sum] = rows[key.first];
    add_entity(row, members, sum);
  }
  for (auto& [group, entry] : rows) {
    finish_birth(entry.first, entry.second);
    table.groups.push_back(std::move(entry.first));
  }
  table.overall = overall_row(linked);
  return table;
}

GroupRow pooled_unique_proportions(const std::vector<EntityRecord>& records,
                                   const std::vector<ConsensusInference>& inferences) {
  return overall_row(link(records, inferences));
}

const OutlierResult* StatsReport::outlier(const std::string& group, const std::string& category) const {
  for (const auto& o : outliers) {
    if (o.group == group && o.category == category) return &o;
  }
  return nullptr;
}

const ProportionEstimate* StatsReport::find(const std::string& group, const std::string& category) const {
  const auto& list = group == kOverall ? overall : estimates;
  for (const auto& e : list) {
    if (e.group == group && e.category == category) return &e;
  }
  return nullptr;
}

StatsReport compute_stats(const DemographicTable& table, const StatsConfig& config) {
  if (!(config.alpha > 0 && config.alpha < 1)) throw InvalidInput("alpha must lie in (0,1)");
  StatsReport report;
  report.alpha = config.alpha;
  report.variance = config.variance;
  report.table = table;

  std::vector<std::string> categories(kDiversityCategories.begin(), kDiversityCategories.end());
  for (const auto& r : region_categories()) categories.push_back(r);

  int widest = 0;
  for (const auto& category : categories) {
    std::vector<GroupCount> counts;
    for (const auto& row : table.groups) {
      auto it = row.counts.find(category);
      if (it != row.counts.end() && it->second.n > 0) counts.push_back({row.group, it->second.k, it->second.n});
    }
    int m = config.family_size > 0 ? config.family_size : static_cast<int>(counts.size());
    widest = std::max(widest, m);
    for (const auto& c : counts) report.estimates.push_back(estimate(c.group, category, c.k, c.n, config.alpha / m));

    bool diversity = std::find(kDiversityCategories.begin(), kDiversityCategories.end(), category) !=
                     kDiversityCategories.end();
    if (diversity && counts.size() >= 2) {
      auto tests = leave_one_out_tests(category, counts, config.alpha, config.variance, m);
      report.outliers.insert(report.outliers.end(), tests.begin(), tests.end());
    }
    auto it = table.overall.counts.find(category);
    if (it != table.overall.counts.end() && it->second.n > 0) {
      report.overall.push_back(estimate(std::string(kOverall), category, it->second.k, it->second.n, config.alpha));
    }
  }
  report.family_size = config.family_size > 0 ? config.family_size : widest;
  return report;
}

std::vector<GroupProfile> to_profiles(const DemographicTable& table) {
  std::vector<GroupProfile> out;
  for (const auto& row : table.groups) {
    GroupProfile p{row.group, {}};
    for (const auto& [name, c] : row.counts) {
      if (c.n > 0) p.values[name] = static_cast<double>(c.k) / c.n;
    }
    if (row.avg_birth_year) p.values["avg_birth_year"] = *row.avg_birth_year;
    out.push_back(std::move(p));
  }
  return out;
}

std::vector<GroupProfile> parse_profiles_csv(std::string_view csv_text) {
  csv::Table table = csv::parse(csv_text);
  std::size_t group_col = table.column("group");
  std::vector<GroupProfile> out;
  for (std::size_t i = 0; i < table.rows.size(); ++i) {
    GroupProfile p{table.rows[i][group_col], {}};
    for (std::size_t c = 0; c < table.header.size(); ++c) {
      const std::string& name = table.header[c];
      const std::string& cell = table.rows[i][c];
      if (c == group_col || cell.empty()) continue;
      double v;
      try {
        std::size_t used = 0;
        v = std::stod(cell, &used);
        if (used != cell.size()) throw std::invalid_argument(cell);
      } catch (const std::logic_error&) {
        throw MalformedRow(fmt::format("line {}: column {} is not a number: '{}'", table.line_numbers[i], name, cell));
      }
      if (name.ends_with("_pct")) p.values[name.substr(0, name.size() - 4)] = v / 100;
      else p.values[name] = v;
    }
    out.push_back(std::move(p));
  }
  return out;
}

std::string profiles_to_csv(const std::vector<GroupProfile>& profiles) {
  std::vector<std::string> names(kDiversityCategories.begin(), kDiversityCategories.end());
  for (const auto& r : region_categories()) names.push_back(r);
  std::ostringstream os;
  std::vector<std::string> header = {"group"};
  for (const auto& n : names) header.push_back(n + "_pct");
  header.emplace_back("avg_birth_year");
  csv::write_row(os, header);
  for (const auto& p : profiles) {
    std::vector<std::string> row = {p.group};
    for (const auto& n : names) {
      auto it = p.values.find(n);
      row.push_back(it == p.values.end() ? "" : num(100 * it->second));
    }
    auto it = p.values.find("avg_birth_year");
    row.push_back(it == p.values.end() ? "" : num(it->second));
    csv::write_row(os, row);
  }
  return os.str();
}

std::string stats_to_csv(const StatsReport& report) {
  std::ostringstream os;
  os << kStatsHeader << "\n";
  auto write = [&](const ProportionEstimate& e) {
    const OutlierResult* o = report.outlier(e.group, e.category);
    csv::write_row(os, {e.group, e.category, std::to_string(e.k), std::to_string(e.n), num(e.p_hat), num(e.ci_low),
                        num(e.ci_high), num(e.alpha_effective), o ? std::string(to_token(o->direction)) : "",
                        o ? num(o->raw_p) : "", o ? num(o->adjusted_p) : ""});
  };
  for (const auto& e : report.estimates) write(e);
  for (const auto& e : report.overall) write(e);
  return os.str();
}

StatsReport parse_stats_csv(std::string_view csv_text) {
  csv::Table table = csv::parse(csv_text);
  StatsReport report;
  for (std::size_t i = 0; i < table.rows.size(); ++i) {
    csv::RowView row(table, i);
    try {
      ProportionEstimate e{row["group"],
                           row["category"],
                           std::stoi(row["k"]),
                           std::stoi(row["n"]),
                           std::stod(row["p_hat"]),
                           std::stod(row["ci_low"]),
                           std::stod(row["ci_high"]),
                           std::stod(row["alpha_effective"])};
      if (!row["direction"].empty()) {
        auto d = parse_direction(row["direction"]);
        if (!d) throw std::invalid_argument("direction");
        OutlierResult o;
        o.group = e.group;
        o.category = e.category;
        o.direction = *d;
        o.raw_p = std::stod(row["raw_p"]);
        o.adjusted_p = std::stod(row["adjusted_p"]);
        report.outliers.push_back(o);
      }
      (e.group == kOverall ? report.overall : report.estimates).push_back(std::move(e));
    } catch (const std::logic_error&) {
      throw MalformedRow(fmt::format("line {}: bad stats row", row.line()));
    }
  }
  return report;
}

std::string stats_to_json(const StatsReport& report) {
  using J = nlohmann::ordered_json;
  auto est_json = [&](const ProportionEstimate& e) {
    J j;
    j["k"] = e.k;
    j["n"] = e.n;
    j["p_hat"] = e.p_hat;
    j["ci"] = {e.ci_low, e.ci_high};
    j["alpha_effective"] = e.alpha_effective;
    if (const OutlierResult* o = report.outlier(e.group, e.category)) {
      j["direction"] = to_token(o->direction);
      j["z"] = o->z;
      j["raw_p"] = o->raw_p;
      j["adjusted_p"] = o->adjusted_p;
      j["pool_rest"] = o->pool_rest;
      if (!o->note.empty()) j["note"] = o->note;
    }
    return j;
  };
  J doc;
  doc["alpha"] = report.alpha;
  doc["family_size"] = report.family_size;
  doc["test_variance"] = report.variance == TestVariance::Pooled ? "pooled" : "unpooled";
  doc["groups"] = J::array();
  for (const auto& row : report.table.groups) {
    J g;
    g["group"] = row.group;
    g["unique_entities"] = row.unique_entities;
    g["avg_birth_year"] = row.avg_birth_year ? J(*row.avg_birth_year) : J(nullptr);
    g["categories"] = J::object();
    for (const auto& e : report.estimates) {
      if (e.group == row.group) g["categories"][e.category] = est_json(e);
    }
    doc["groups"].push_back(std::move(g));
  }
  J overall;
  overall["unique_entities"] = report.table.overall.unique_entities;
  overall["avg_birth_year"] =
      report.table.overall.avg_birth_year ? J(*report.table.overall.avg_birth_year) : J(nullptr);
  overall["categories"] = J::object();
  for (const auto& e : report.overall) overall["categories"][e.category] = est_json(e);
  doc["overall"] = std::move(overall);
  return doc.dump(2) + "\n";
}

CoverageResult wilson_coverage(int n, double p, double alpha, int replicates, std::uint64_t seed) {
  int covered = 0;
  #pragma omp parallel for reduction(+ : covered) schedule(static)
  for (int i = 0; i < replicates; ++i) {
    std::mt19937_64 rng(derive_seed(seed, static_cast<std::uint64_t>(i)));
    int k = std::binomial_distribution<int>(n, p)(rng);
    covered += covers(k, n, p, alpha) ? 1 : 0;
  }
  return {replicates, covered, replicates ? static_cast<double>(covered) / replicates : 0};
}

FamilywiseResult null_familywise(int groups, int n_per_group, double p, double alpha, int replicates,
                                 std::uint64_t seed, TestVariance variance) {
  int rejections = 0;
  int bad = 0;
  #pragma omp parallel for reduction(+ : rejections, bad) schedule(static)
  for (int i = 0; i < replicates; ++i) {
    bool ok = true;
    rejections += any_rejection(groups, n_per_group, p, alpha, derive_seed(seed, static_cast<std::uint64_t>(i)),
                                variance, ok) ? 1 : 0;
    bad += ok ? 0 : 1;
  }
  return {replicates, rejections, replicates ? static_cast<double>(rejections) / replicates : 0, bad == 0};
}

namespace serial {

CoverageResult wilson_coverage(int n, double p, double alpha, int replicates, std::uint64_t seed) {
  int covered = 0;
  for (int i = 0; i < replicates; ++i) {
    std::mt19937_64 rng(derive_seed(seed, static_cast<std::uint64_t>(i)));
    int k = std::binomial_distribution<int>(n, p)(rng);
    covered += covers(k, n, p, alpha) ? 1 : 0;
  }
  return {replicates, covered, replicates ? static_cast<double>(covered) / replicates : 0};
}

FamilywiseResult null_familywise(int groups, int n_per_group, double p, double alpha, int replicates,
                                 std::uint64_t seed, TestVariance variance) {
  FamilywiseResult r;
  r.replicates = replicates;
  for (int i = 0; i < replicates; ++i) {
    bool ok = true;
    r.any_rejection += any_rejection(groups, n_per_group, p, alpha, derive_seed(seed, static_cast<std::uint64_t>(i)),
                                     variance, ok) ? 1 : 0;
    r.adjusted_never_below_raw = r.adjusted_never_below_raw && ok;
  }
  r.rate = replicates ? static_cast<double>(r.any_rejection) / replicates : 0;
  return r;
}

}  // namespace serial

}  // namespace crowdcensus::stats
