#include <doctest.h>

#include <numeric>

#include "crowdcensus/screening.hpp"
#include "crowdcensus/synth.hpp"
#include "fixtures.hpp"

using namespace crowdcensus;
using namespace crowdcensus::screening;

namespace {

ingest::ResponsePool pool_with(const std::vector<std::pair<std::string, double>>& worker_durations) {
  ingest::ResponsePool pool;
  int i = 0;
  for (const auto& [w, d] : worker_durations) {
    ingest::PoolEntry e;
    e.key = {"A", std::to_string(1000 + i)};
    auto r = fx::base(i++, IiaAnswer::Yes, "A", e.key.entity_id);
    r.worker_id = w;
    r.duration_secs = d;
    e.responses.push_back(r);
    pool.entries.push_back(e);
  }
  return pool;
}

}  // namespace

TEST_CASE("worker profiles") {
  auto pool = pool_with({{"W1", 10}, {"W1", 20}, {"W1", 400}, {"W2", 31}});
  auto profiles = profile_workers(pool, 30);
  REQUIRE(profiles.size() == 2);
  CHECK(profiles[0].worker_id == "W1");
  CHECK(profiles[0].n_responses == 3);
  CHECK(profiles[0].median_duration_secs == 20);
  CHECK(profiles[0].fast_fraction == doctest::Approx(2.0 / 3).epsilon(1e-15));
  CHECK(profiles[1].n_responses == 1);
  CHECK(profiles[1].fast_fraction == 0);
  CHECK(profiles_to_csv(profiles) == profiles_to_csv(serial::profile_workers(pool, 30)));
}

TEST_CASE("flag rule") {
  ScreeningConfig t{30, 581, 0.5, 0.6};
  WorkerProfile prolific{"P", 1391, 12, 14, 0.9, std::nullopt};
  WorkerProfile light{"L", 10, 5, 5, 1.0, std::nullopt};
  WorkerProfile careful{"C", 900, 120, 120, 0.1, 0.95};
  WorkerProfile disagreeing{"D", 900, 120, 120, 0.1, 0.4};
  auto flagged = flag_suspects({prolific, light, careful, disagreeing}, t);
  CHECK(flagged.provenance == Provenance::Flagged);
  CHECK(flagged.worker_ids == std::set<std::string>{"D", "P"});
  CHECK(flag_suspects({}, t).worker_ids.empty());

  // raising fast_fraction never unflags
  for (double f = 0; f <= 1.0; f += 0.05) {
    WorkerProfile w{"X", 600, 50, 50, f, 0.7};
    bool before = !flag_suspects({w}, t).worker_ids.empty();
    w.fast_fraction = std::min(1.0, f + 0.1);
    bool after = !flag_suspects({w}, t).worker_ids.empty();
    CHECK((!before || after));
  }
}

TEST_CASE("exclusions") {
  auto pool = pool_with({{"W1", 10}, {"W2", 20}, {"W1", 30}, {"W3", 40}});
  SUBCASE("empty list is identity") {
    auto out = apply_exclusions(pool, {});
    CHECK(ingest::pool_to_csv(out.pool) == ingest::pool_to_csv(pool));
    CHECK(out.report.total == 0);
  }
  SUBCASE("removes exactly the listed worker") {
    auto out = apply_exclusions(pool, {{{"W1"}, Provenance::Manual}});
    CHECK(out.report.total == 2);
    CHECK(out.report.per_worker.at("W1") == 2);
    CHECK(out.pool.total_responses() == 2);
    CHECK(out.pool.entries.size() == pool.entries.size());
    // untouched responses are identical
    CHECK(out.pool.entries[1].responses == pool.entries[1].responses);
    auto twice = apply_exclusions(out.pool, {{{"W1"}, Provenance::Manual}});
    CHECK(ingest::pool_to_csv(twice.pool) == ingest::pool_to_csv(out.pool));
  }
  SUBCASE("everyone excluded") {
    auto out = apply_exclusions(pool, {{{"W1", "W2", "W3"}, Provenance::Manual}});
    for (const auto& e : out.pool.entries) CHECK(e.responses.empty());
  }
  SUBCASE("csv round trip") {
    auto lists = parse_exclusions_csv("worker_id,provenance\nA,manual\nB,flagged\nC,manual\n");
    REQUIRE(lists.size() == 2);
    std::set<std::string> manual, flagged;
    for (const auto& l : lists) (l.provenance == Provenance::Manual ? manual : flagged) = l.worker_ids;
    CHECK(manual == std::set<std::string>{"A", "C"});
    CHECK(flagged == std::set<std::string>{"B"});
  }
}

TEST_CASE("synthetic prolific workers are found and removed") {
  synth::SynthSpec spec = synth::parse_spec_json(R"({"world":{"collections":4,"records_per_collection":500},
      "workers":{"honest":{"count":9,"volume_weight":1},"spammer":{"count":8,"volume_weight":1}}})");
  auto c = synth::generate(spec, 17);
  auto pool = ingest::pool_responses(c.responses, c.records);
  auto profiles = profile_workers(pool, 30);
  ScreeningConfig t;
  score_agreement(profiles, pool, RegionMap::builtin(), CampaignConfig{}, t.volume_threshold);
  auto flagged = flag_suspects(profiles, t);
  std::set<std::string> spammers;
  for (const auto& [id, a] : c.workers) {
    if (a == synth::Archetype::Spammer) spammers.insert(id);
  }
  CHECK(flagged.worker_ids == spammers);

  int expected = 0;
  for (const auto& r : c.responses) expected += spammers.count(r.worker_id) ? 1 : 0;
  auto out = apply_exclusions(pool, {flagged});
  CHECK(out.report.total == expected);

  // honest durations are calibrated to a mean near 106 seconds
  double sum = 0;
  int n = 0;
  for (const auto& r : c.responses) {
    if (!spammers.count(r.worker_id)) sum += r.duration_secs, ++n;
  }
  CHECK(sum / n == doctest::Approx(106).epsilon(0.03));
}
