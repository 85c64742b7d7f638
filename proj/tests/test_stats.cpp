#include <doctest.h>

#include <random>

#include "crowdcensus/csv.hpp"
#include "crowdcensus/error.hpp"
#include "crowdcensus/normal.hpp"
#include "crowdcensus/stats.hpp"
#include "fixtures.hpp"
#include "oracles.hpp"

using namespace crowdcensus;
using namespace crowdcensus::stats;

TEST_CASE("normal quantile against bisection") {
  for (double p : {1e-12, 1e-6, 0.0013888888888888889, 0.01, 0.025, 0.2, 0.5, 0.7, 0.975, 0.999, 1 - 1e-9}) {
    // upper tail by symmetry, where 1 - p is exact and the lower-tail cdf keeps precision
    double want = p > 0.5 ? -oracle::normal_quantile(1 - p) : oracle::normal_quantile(p);
    CHECK(normal::quantile(p) == doctest::Approx(want).epsilon(1e-12));
  }
  CHECK(normal::critical_value(0.05) == doctest::Approx(1.959963984540054).epsilon(1e-14));
  // m = 18 family: Φ⁻¹(1 − 0.05/36)
  CHECK(normal::critical_value(0.05 / 18) == doctest::Approx(oracle::normal_quantile(1 - 0.05 / 36)).epsilon(1e-12));
  CHECK(normal::critical_value(0.05 / 18) == doctest::Approx(2.99).epsilon(0.002));
  CHECK_THROWS_AS(normal::quantile(1.5), InvalidInput);
  CHECK(normal::sf(37) > 0);
  CHECK(normal::sf(-37) == 1.0);
}

TEST_CASE("Wilson interval against the textbook formula") {
  std::mt19937_64 rng(1);
  for (int rep = 0; rep < 2000; ++rep) {
    int n = 1 + static_cast<int>(rng() % 5000);
    int k = static_cast<int>(rng() % (n + 1));
    double alpha = rep % 2 ? 0.05 : 0.05 / 18;
    auto ci = wilson_ci(k, n, alpha);
    auto want = oracle::wilson(k, n, oracle::normal_quantile(1 - alpha / 2));
    CHECK(ci.low == doctest::Approx(want.first).epsilon(1e-12).scale(1));
    CHECK(ci.high == doctest::Approx(want.second).epsilon(1e-12).scale(1));
    double p = static_cast<double>(k) / n;
    CHECK(ci.low <= p);
    CHECK(ci.high >= p);
  }
  CHECK(wilson_ci(0, 10, 0.05).low == 0.0);
  CHECK(wilson_ci(10, 10, 0.05).high == 1.0);
  auto sym = wilson_ci(5000, 10000, 0.05);
  CHECK(sym.low + sym.high == doctest::Approx(1.0).epsilon(1e-14));
  CHECK_THROWS_AS(wilson_ci(3, 2, 0.05), InvalidInput);
  CHECK_THROWS_AS(wilson_ci(0, 0, 0.05), InvalidInput);
  CHECK_THROWS_AS(wilson_ci(1, 2, 0), InvalidInput);
  // width shrinks with n at fixed p_hat
  double prev = 1;
  for (int n = 10; n <= 10000; n *= 10) {
    auto ci = wilson_ci(n / 5, n, 0.05);
    CHECK(ci.high - ci.low < prev);
    prev = ci.high - ci.low;
  }
}

TEST_CASE("simultaneous intervals") {
  std::vector<ProportionEstimate> fam;
  for (int g = 0; g < 18; ++g) fam.push_back(estimate("G" + std::to_string(g), "women", 10 + g, 200, 0.05));
  auto one = simultaneous_cis(fam, 0.05, 1);
  for (std::size_t i = 0; i < fam.size(); ++i) {
    CHECK(one[i].ci_low == fam[i].ci_low);
    CHECK(one[i].ci_high == fam[i].ci_high);
  }
  auto adj = simultaneous_cis(fam, 0.05);
  for (std::size_t i = 0; i < fam.size(); ++i) {
    CHECK(adj[i].alpha_effective == doctest::Approx(0.05 / 18));
    CHECK(adj[i].ci_high - adj[i].ci_low > fam[i].ci_high - fam[i].ci_low);
  }
}

TEST_CASE("leave-one-out tests against an independent z-test") {
  std::mt19937_64 rng(8);
  std::vector<GroupCount> counts;
  for (int g = 0; g < 18; ++g) {
    int n = 600;
    double p = g == 4 ? 0.30 : 0.15;
    std::binomial_distribution<int> b(n, p);
    counts.push_back({"G" + std::to_string(g), b(rng), n});
  }
  auto res = leave_one_out_tests("women", counts, 0.05);
  REQUIRE(res.size() == 18);
  int k_all = 0, n_all = 0;
  for (const auto& c : counts) k_all += c.k, n_all += c.n;
  for (std::size_t g = 0; g < counts.size(); ++g) {
    auto want = oracle::two_proportion(counts[g].k, counts[g].n, k_all - counts[g].k, n_all - counts[g].n);
    CHECK(res[g].z == doctest::Approx(want.z).epsilon(1e-10));
    CHECK(res[g].raw_p == doctest::Approx(want.p).epsilon(1e-9).scale(1e-300));
    CHECK(res[g].adjusted_p == doctest::Approx(std::min(1.0, want.p * 18)).epsilon(1e-9).scale(1e-300));
    CHECK(res[g].adjusted_p >= res[g].raw_p);
    CHECK(res[g].adjusted_p <= 1.0);
  }
  CHECK(res[4].direction == Direction::Higher);
  for (std::size_t g = 0; g < counts.size(); ++g) {
    if (g != 4) CHECK(res[g].direction == Direction::NotSignificant);
  }

  SUBCASE("relabeling does not change results") {
    auto shuffled = counts;
    std::shuffle(shuffled.begin(), shuffled.end(), rng);
    auto res2 = leave_one_out_tests("women", shuffled, 0.05);
    for (const auto& r : res2) {
      auto it = std::find_if(res.begin(), res.end(), [&](const auto& x) { return x.group == r.group; });
      CHECK(it->raw_p == r.raw_p);
      CHECK(it->direction == r.direction);
    }
  }
  SUBCASE("identical to pool") {
    std::vector<GroupCount> same = {{"A", 10, 100}, {"B", 20, 200}, {"C", 30, 300}};
    for (const auto& r : leave_one_out_tests("x", same, 0.05)) {
      CHECK(r.raw_p == doctest::Approx(1.0));
      CHECK(r.direction == Direction::NotSignificant);
    }
  }
  SUBCASE("degenerate pool") {
    std::vector<GroupCount> zero = {{"A", 0, 100}, {"B", 0, 200}};
    auto r = leave_one_out_tests("x", zero, 0.05);
    CHECK(r[0].note == "degenerate");
    CHECK(r[0].direction == Direction::NotSignificant);
  }
  CHECK_THROWS_AS(leave_one_out_tests("x", std::vector<GroupCount>{{"A", 1, 2}}, 0.05), InvalidInput);
}

TEST_CASE("sample planner") {
  auto p = plan_sample({1.0, std::nullopt, 0}, 0.033, 0.95);
  CHECK(p.required_iia == 882);
  CHECK(p.required_raw == 882);
  CHECK(plan_sample({0.5, 0.5, 0}, 0.033, 0.95).required_raw == 2 * 882);
  CHECK(plan_sample({0.88, 0.5, 0}, 0.033, 0.95).required_raw == 1003);
  CHECK(plan_sample({1.0, 0.5, 5000}, 0.033, 0.95).stage2_draw == 0);
  CHECK(plan_sample({1.0, 0.5, 500}, 0.033, 0.95).stage2_draw == 382);
  // closed form with an independent quantile
  double z = oracle::normal_quantile(0.975);
  CHECK(p.required_iia == static_cast<int>(std::ceil(z * z * 0.25 / (0.033 * 0.033))));
  CHECK_THROWS_AS(plan_sample({0.0, 0.5, 0}, 0.033, 0.95), InvalidInput);
  CHECK_THROWS_AS(plan_sample({1.0, 0.5, 0}, 0.6, 0.95), InvalidInput);
}

TEST_CASE("published coverage totals give an IIA rate near 0.88") {
  auto cov = csv::read_file(fx::data_dir() + "/published_coverage.csv");
  int sampled = 0, iia = 0;
  for (std::size_t i = 0; i < cov.rows.size(); ++i) {
    csv::RowView row(cov, i);
    sampled += std::stoi(row["sampled"]);
    iia += std::stoi(row["iia"]);
  }
  CHECK(cov.rows.size() == 18);
  CHECK(sampled == 11522);
  CHECK(iia == 10108);
  double rate = static_cast<double>(iia) / sampled;
  CHECK(rate == doctest::Approx(0.88).epsilon(0.005));
  int raw = plan_sample({rate, 0.5, 0}, 0.033, 0.95).required_raw;
  CHECK(raw == static_cast<int>(std::ceil(882 / rate)));
}

namespace {

consensus::ConsensusInference iia_record(std::string coll, std::string ent, std::optional<Gender> g,
                                         std::optional<EthnicityGroup> e = std::nullopt) {
  consensus::ConsensusInference c;
  c.key = {std::move(coll), std::move(ent)};
  c.iia = consensus::IiaVerdict::Iia;
  c.n_responses = 5;
  c.gender.value = g;
  c.ethnicity.value = e;
  return c;
}

}  // namespace

TEST_CASE("tabulate dedupes by normalized name") {
  std::vector<EntityRecord> recs;
  std::vector<consensus::ConsensusInference> infs;
  auto add = [&](std::string coll, std::string ent, std::string name, std::optional<Gender> g) {
    recs.push_back(fx::record(coll, ent, name));
    infs.push_back(iia_record(coll, ent, g));
  };
  add("A", "1", "Artist One", Gender::Woman);
  add("B", "1", "artist one", Gender::Woman);
  add("C", "1", "ARTIST  ONE", Gender::Woman);
  add("A", "2", "Two", Gender::Man);
  add("B", "2", "Three", Gender::Man);
  add("B", "3", "Four", std::nullopt);
  auto t = tabulate(recs, infs);
  REQUIRE(t.groups.size() == 3);
  CHECK(t.groups[0].counts.at("women").k == 1);
  CHECK(t.groups[0].counts.at("women").n == 2);
  CHECK(t.overall.counts.at("women").k == 1);
  CHECK(t.overall.counts.at("women").n == 3);
  CHECK(t.overall.unique_entities == 4);

  SUBCASE("no duplicates equals concatenation") {
    std::vector<EntityRecord> r2;
    std::vector<consensus::ConsensusInference> i2;
    for (int i = 0; i < 20; ++i) {
      r2.push_back(fx::record(i % 2 ? "A" : "B", std::to_string(i), "N" + std::to_string(i)));
      i2.push_back(iia_record(r2.back().key.collection_id, r2.back().key.entity_id,
                              i % 3 ? Gender::Man : Gender::Woman));
    }
    auto t2 = tabulate(r2, i2);
    int k = 0, n = 0;
    for (const auto& g : t2.groups) k += g.counts.at("women").k, n += g.counts.at("women").n;
    CHECK(t2.overall.counts.at("women").k == k);
    CHECK(t2.overall.counts.at("women").n == n);
  }
  SUBCASE("conflicting linked records are left out") {
    infs[2].gender.value = Gender::Man;
    auto t3 = tabulate(recs, infs);
    CHECK(t3.overall.counts.at("women").n == 2);
  }
  SUBCASE("blank names count separately") {
    add("A", "9", "", Gender::Woman);
    add("B", "9", "", Gender::Woman);
    auto t5 = tabulate(recs, infs);
    CHECK(t5.overall.counts.at("women").n == 5);
  }
  SUBCASE("category shares sum to one") {
    std::vector<EntityRecord> r4;
    std::vector<consensus::ConsensusInference> i4;
    for (int i = 0; i < 30; ++i) {
      r4.push_back(fx::record("A", std::to_string(i), "P" + std::to_string(i)));
      i4.push_back(iia_record("A", std::to_string(i), std::nullopt, static_cast<EthnicityGroup>(i % 5)));
    }
    auto t4 = tabulate(r4, i4);
    int k = 0;
    int n = t4.groups[0].counts.at("white").n;
    for (auto c : {"asian", "black", "hispanic", "white", "other"}) k += t4.groups[0].counts.at(c).k;
    CHECK(k == n);
  }
}

TEST_CASE("compute_stats families and csv round trip") {
  DemographicTable t;
  for (int g = 0; g < 4; ++g) {
    GroupRow row;
    row.group = "G" + std::to_string(g);
    row.counts["women"] = {10 + 10 * g, 200};
    row.counts["white"] = {150, 200};
    t.groups.push_back(row);
  }
  t.overall.group = "Overall";
  t.overall.counts["women"] = {100, 800};
  StatsConfig cfg;
  auto s = compute_stats(t, cfg);
  const auto* e = s.find("G0", "women");
  REQUIRE(e);
  CHECK(e->alpha_effective == doctest::Approx(0.05 / 4));
  auto ov = s.find("Overall", "women");
  REQUIRE(ov);
  CHECK(ov->alpha_effective == 0.05);
  CHECK(s.outlier("G3", "women")->direction == Direction::Higher);
  CHECK(s.outlier("G0", "women")->direction == Direction::Lower);

  cfg.family_size = 18;
  CHECK(compute_stats(t, cfg).find("G0", "women")->alpha_effective == doctest::Approx(0.05 / 18));

  auto text = stats_to_csv(s);
  CHECK(stats_to_csv(parse_stats_csv(text)) == text);
}

TEST_CASE("Monte Carlo kernels: serial equals parallel") {
  auto a = wilson_coverage(200, 0.2, 0.05, 3000, 77);
  auto b = serial::wilson_coverage(200, 0.2, 0.05, 3000, 77);
  CHECK(a.covered == b.covered);
  auto c = null_familywise(6, 300, 0.2, 0.05, 500, 9);
  auto d = serial::null_familywise(6, 300, 0.2, 0.05, 500, 9);
  CHECK(c.any_rejection == d.any_rejection);
  CHECK(c.adjusted_never_below_raw);
}

TEST_CASE("profile csv") {
  auto profiles = parse_profiles_csv("group,women_pct,white_pct,avg_birth_year\nX,12.5,80,1900\nY,,50,1850\n");
  REQUIRE(profiles.size() == 2);
  CHECK(profiles[0].values.at("women") == doctest::Approx(0.125));
  CHECK(profiles[0].values.at("avg_birth_year") == 1900);
  CHECK_FALSE(profiles[1].values.count("women"));
}
