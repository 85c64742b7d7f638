#include "crowdcensus/screening.hpp"

#include <algorithm>
#include <sstream>
#include <unordered_map>

#include "json.hpp"

#include "crowdcensus/consensus.hpp"
#include "crowdcensus/csv.hpp"
#include "crowdcensus/error.hpp"

namespace crowdcensus::screening {
namespace {

double median(std::vector<double> values) {
  std::sort(values.begin(), values.end());
  std::size_t n = values.size();
  if (n == 0) return 0;
  return n % 2 ? values[n / 2] : 0.5 * (values[n / 2 - 1] + values[n / 2]);
}

WorkerProfile summarize(const std::string& worker, std::vector<double> durations, double cutoff) {
  WorkerProfile p;
  p.worker_id = worker;
  p.n_responses = static_cast<int>(durations.size());
  int fast = 0;
  double total = 0;
  for (double d : durations) {
    fast += d <= cutoff ? 1 : 0;
    total += d;
  }
  p.fast_fraction = static_cast<double>(fast) / p.n_responses;
  p.mean_duration_secs = total / p.n_responses;
  p.median_duration_secs = median(std::move(durations));
  return p;
}

void sort_profiles(std::vector<WorkerProfile>& profiles) {
  std::sort(profiles.begin(), profiles.end(), [](const WorkerProfile& a, const WorkerProfile& b) {
    if (a.n_responses != b.n_responses) return a.n_responses > b.n_responses;
    return a.worker_id < b.worker_id;
  });
}

// Durations per worker in canonical pool order.
std::map<std::string, std::vector<double>> durations_by_worker(const ingest::ResponsePool& pool) {
  std::map<std::string, std::vector<double>> by_worker;
  for (const auto& e : pool.entries) {
    for (const auto& r : e.responses) by_worker[r.worker_id].push_back(r.duration_secs);
  }
  return by_worker;
}

std::string_view provenance_token(Provenance p) { return p == Provenance::Manual ? "manual" : "flagged"; }

}  // namespace

std::vector<WorkerProfile> profile_workers(const ingest::ResponsePool& pool, double fast_cutoff_secs) {
  auto by_worker = durations_by_worker(pool);
  std::vector<std::pair<std::string, std::vector<double>>> items(std::make_move_iterator(by_worker.begin()),
                                                                 std::make_move_iterator(by_worker.end()));
  std::vector<WorkerProfile> profiles(items.size());
  const std::ptrdiff_t n = static_cast<std::ptrdiff_t>(items.size());
  #pragma omp parallel for schedule(dynamic, 16)
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    profiles[i] = summarize(items[i].first, std::move(items[i].second), fast_cutoff_secs);
  }
  sort_profiles(profiles);
  return profiles;
}

namespace serial {

std::vector<WorkerProfile> profile_workers(const ingest::ResponsePool& pool, double fast_cutoff_secs) {
  std::vector<WorkerProfile> profiles;
  for (auto& [worker, durations] : durations_by_worker(pool)) {
    profiles.push_back(summarize(worker, std::move(durations), fast_cutoff_secs));
  }
  sort_profiles(profiles);
  return profiles;
}

}  // namespace serial

void score_agreement(std::vector<WorkerProfile>& profiles, const ingest::ResponsePool& pool,
                     const RegionMap& regions, const CampaignConfig& campaign, int volume_threshold) {
  std::set<std::string> under_review;
  for (const auto& p : profiles) {
    if (p.n_responses >= volume_threshold) under_review.insert(p.worker_id);
  }
  ExclusionList yardstick_excluded{under_review, Provenance::Flagged};
  auto yardstick_pool = apply_exclusions(pool, {yardstick_excluded}).pool;
  auto provisional = consensus::run_consensus(yardstick_pool, regions, campaign);

  std::unordered_map<std::string, std::pair<int, int>> tallies;  // worker -> (matches, comparisons)
  for (std::size_t i = 0; i < pool.entries.size(); ++i) {
    const auto& inf = provisional[i];
    for (const auto& r : pool.entries[i].responses) {
      auto& [match, total] = tallies[r.worker_id];
      auto compare = [&](bool agrees) {
        ++total;
        match += agrees ? 1 : 0;
      };
      if (inf.iia == consensus::IiaVerdict::Iia) compare(r.iia == IiaAnswer::Yes);
      if (inf.iia == consensus::IiaVerdict::NonIia) compare(r.iia == IiaAnswer::No);
      if (inf.iia != consensus::IiaVerdict::Iia) continue;

      if (inf.gender.value && r.gender &&
          (r.gender->category == GenderAnswer::Man || r.gender->category == GenderAnswer::Woman)) {
        compare((r.gender->category == GenderAnswer::Woman) == (*inf.gender.value == Gender::Woman));
      }
      if (inf.has_ethnicity() && r.ethnicity && r.ethnicity->status == AnswerStatus::Answered &&
          !r.ethnicity->categories.empty()) {
        bool only_inferred = std::all_of(r.ethnicity->categories.begin(), r.ethnicity->categories.end(),
                                         [&](Ethnicity e) { return fold(e) == *inf.ethnicity.value; });
        compare(only_inferred);
      }
      if (inf.region.value && r.origin && r.origin->status == AnswerStatus::Answered) {
        if (auto region = regions.lookup(r.origin->country)) compare(*region == *inf.region.value);
      }
      if (inf.birth.decade && r.birth) {
        if (auto year = consensus::parse_birth_year(r.birth->raw)) {
          compare(consensus::round_to_decade(Rational(*year), campaign.decade_rounding) == *inf.birth.decade);
        }
      }
    }
  }
  for (auto& p : profiles) {
    auto it = tallies.find(p.worker_id);
    if (it != tallies.end() && it->second.second > 0) {
      p.consensus_agreement = static_cast<double>(it->second.first) / it->second.second;
    } else {
      p.consensus_agreement.reset();
    }
  }
}

ExclusionList flag_suspects(const std::vector<WorkerProfile>& profiles, const ScreeningConfig& t) {
  if (t.fast_fraction_threshold < 0 || t.fast_fraction_threshold > 1 || t.agreement_threshold < 0 ||
      t.agreement_threshold > 1 || t.volume_threshold < 0) {
    throw InvalidInput("screening thresholds out of range");
  }
  ExclusionList out;
  out.provenance = Provenance::Flagged;
  for (const auto& p : profiles) {
    if (p.n_responses < t.volume_threshold) continue;
    bool fast = p.fast_fraction >= t.fast_fraction_threshold;
    bool disagrees = p.consensus_agreement && *p.consensus_agreement < t.agreement_threshold;
    if (fast || disagrees) out.worker_ids.insert(p.worker_id);
  }
  return out;
}

ScreenedPool apply_exclusions(const ingest::ResponsePool& pool, const std::vector<ExclusionList>& lists) {
  std::set<std::string> excluded;
  for (const auto& l : lists) excluded.insert(l.worker_ids.begin(), l.worker_ids.end());

  ScreenedPool out;
  out.pool.entries.reserve(pool.entries.size());
  for (const auto& e : pool.entries) {
    ingest::PoolEntry kept{e.key, {}};
    for (const auto& r : e.responses) {
      if (excluded.contains(r.worker_id)) {
        ++out.report.per_worker[r.worker_id];
        ++out.report.per_record[e.key];
        ++out.report.total;
      } else {
        kept.responses.push_back(r);
      }
    }
    out.pool.entries.push_back(std::move(kept));
  }
  return out;
}

std::string profiles_to_csv(const std::vector<WorkerProfile>& profiles) {
  std::ostringstream os;
  os << "worker_id,n_responses,median_duration_secs,mean_duration_secs,fast_fraction,consensus_agreement\n";
  for (const auto& p : profiles) {
    std::ostringstream agree;
    if (p.consensus_agreement) agree << *p.consensus_agreement;
    std::ostringstream med, mean, fast;
    med << p.median_duration_secs;
    mean << p.mean_duration_secs;
    fast << p.fast_fraction;
    csv::write_row(os, {p.worker_id, std::to_string(p.n_responses), med.str(), mean.str(), fast.str(), agree.str()});
  }
  return os.str();
}

std::string exclusions_to_csv(const ExclusionList& list) {
  std::ostringstream os;
  os << "worker_id,provenance\n";
  for (const auto& w : list.worker_ids) csv::write_row(os, {w, std::string(provenance_token(list.provenance))});
  return os.str();
}

std::vector<ExclusionList> parse_exclusions_csv(std::string_view csv_text) {
  csv::Table table = csv::parse(csv_text);
  std::size_t worker_col = table.column("worker_id");
  bool has_prov = table.has_column("provenance");
  ExclusionList manual{{}, Provenance::Manual};
  ExclusionList flagged{{}, Provenance::Flagged};
  for (std::size_t i = 0; i < table.rows.size(); ++i) {
    const auto& worker = table.rows[i][worker_col];
    std::string prov = has_prov ? table.rows[i][table.column("provenance")] : "manual";
    if (worker.empty()) throw MalformedRow("line " + std::to_string(table.line_numbers[i]) + ": empty worker_id");
    if (prov == "manual" || prov.empty()) manual.worker_ids.insert(worker);
    else if (prov == "flagged") flagged.worker_ids.insert(worker);
    else throw MalformedRow("line " + std::to_string(table.line_numbers[i]) + ": provenance must be manual or flagged");
  }
  std::vector<ExclusionList> out;
  if (!manual.worker_ids.empty()) out.push_back(std::move(manual));
  if (!flagged.worker_ids.empty()) out.push_back(std::move(flagged));
  return out;
}

std::string report_to_json(const RemovalReport& report) {
  nlohmann::ordered_json doc;
  doc["total_removed"] = report.total;
  doc["per_worker"] = nlohmann::ordered_json::object();
  for (const auto& [w, n] : report.per_worker) doc["per_worker"][w] = n;
  doc["per_record"] = nlohmann::ordered_json::array();
  for (const auto& [k, n] : report.per_record) {
    doc["per_record"].push_back({{"collection_id", k.collection_id}, {"entity_id", k.entity_id}, {"removed", n}});
  }
  return doc.dump(2) + "\n";
}

}  // namespace crowdcensus::screening
