#include <doctest.h>

#include <algorithm>
#include <random>

#include "crowdcensus/error.hpp"
#include "crowdcensus/reconcile.hpp"
#include "fixtures.hpp"

using namespace crowdcensus;
using namespace crowdcensus::reconcile;
using consensus::ConsensusInference;

namespace {

ConsensusInference inferred(std::string coll, std::string ent, std::optional<Gender> g = std::nullopt) {
  ConsensusInference c;
  c.key = {std::move(coll), std::move(ent)};
  c.iia = consensus::IiaVerdict::Iia;
  c.n_responses = 5;
  c.gender.value = g;
  c.gender.status = g ? consensus::Status::Inferred : consensus::Status::BelowThreshold;
  return c;
}

struct Fixture {
  std::vector<EntityRecord> records;
  std::vector<ConsensusInference> infs;
  void add(std::string coll, std::string ent, std::string name, std::optional<Gender> g) {
    records.push_back(fx::record(coll, ent, std::move(name)));
    infs.push_back(inferred(coll, ent, g));
  }
};

}  // namespace

TEST_CASE("name normalization") {
  CHECK(normalize_name("  Rachel   Lachowicz ") == "rachel lachowicz");
  CHECK(normalize_name("RACHEL LACHOWICZ") == normalize_name("rachel\tlachowicz"));
  // precomposed vs combining acute
  CHECK(normalize_name("\xC3\x89lizabeth Baillon") == normalize_name("E\xCC\x81lizabeth Baillon"));
  CHECK(normalize_name("Stra\xC3\x9F" "e") == "strasse");
  CHECK(normalize_name("Bai Yiluo") != normalize_name("Bai Yi Luo"));
}

TEST_CASE("duplicates and consistency") {
  Fixture f;
  f.add("WMAA", "1", "Rachel Lachowicz", Gender::Woman);
  f.add("MOCA", "7", "Rachel Lachowicz", Gender::Woman);
  f.add("DAM", "3", "rachel  lachowicz", std::nullopt);
  f.add("SFMOMA", "2", "Paul Pfeiffer", std::nullopt);
  f.add("RISDM", "5", "Paul Pfeiffer", std::nullopt);
  f.add("MMA", "9", "Someone Else", Gender::Man);
  f.infs[3].ethnicity.value = EthnicityGroup::Other;
  f.infs[4].ethnicity.value = EthnicityGroup::White;

  auto groups = link_duplicates(f.records, f.infs);
  REQUIRE(groups.size() == 2);
  auto lach = std::find_if(groups.begin(), groups.end(), [](const auto& g) { return g.identity == "rachel lachowicz"; });
  REQUIRE(lach != groups.end());
  CHECK(lach->members.size() == 3);

  auto report = check_consistency(groups, f.infs);
  CHECK(report.count(Attribute::Gender, ConsistencyStatus::PartialMissing) == 1);
  CHECK(report.count(Attribute::Ethnicity, ConsistencyStatus::Conflict) == 1);
  std::vector<Repair> proposals;
  for (const auto& e : report.entries) proposals.insert(proposals.end(), e.proposals.begin(), e.proposals.end());
  REQUIRE(proposals.size() == 1);
  CHECK(proposals[0].record == RecordKey{"DAM", "3"});
  CHECK(proposals[0].attribute == Attribute::Gender);
  CHECK(proposals[0].new_value == "woman");

  SUBCASE("symmetric in collection order") {
    auto recs = f.records;
    auto infs = f.infs;
    std::reverse(recs.begin(), recs.end());
    std::reverse(infs.begin(), infs.end());
    CHECK(report_to_json(check_consistency(link_duplicates(recs, infs), infs)) == report_to_json(report));
  }

  SUBCASE("approved repair fills the gap and is audited") {
    auto result = apply_repairs(f.infs, proposals);
    REQUIRE(result.audit.size() == 1);
    CHECK(result.audit[0].old_value == "");
    CHECK(result.audit[0].new_value == "woman");
    CHECK(*result.inferences[2].gender.value == Gender::Woman);
    CHECK(result.inferences[2].repaired_mask == attribute_bit(Attribute::Gender));
    for (std::size_t i = 0; i < f.infs.size(); ++i) {
      if (i == 2) continue;
      CHECK(consensus::inferences_to_csv({result.inferences[i]}) == consensus::inferences_to_csv({f.infs[i]}));
    }
  }
  SUBCASE("nothing approved, nothing changes") {
    auto result = apply_repairs(f.infs, {});
    CHECK(result.audit.empty());
    CHECK(consensus::inferences_to_csv(result.inferences) == consensus::inferences_to_csv(f.infs));
  }
  SUBCASE("unknown target") {
    CHECK_THROWS_AS(apply_repairs(f.infs, {{{"NOPE", "1"}, Attribute::Gender, "woman", "x"}}), UnknownRepairTarget);
    CHECK_THROWS_AS(apply_repairs(f.infs, {{{"DAM", "3"}, Attribute::Gender, "giraffe", "x"}}), UnknownRepairTarget);
    CHECK_THROWS_AS(apply_repairs(f.infs, {{{"DAM", "3"}, Attribute::BirthDecade, "1855", "x"}}),
                    UnknownRepairTarget);
  }
  SUBCASE("blank names are never linked") {
    Fixture g;
    g.add("A", "1", "", Gender::Man);
    g.add("B", "1", "  ", Gender::Woman);
    CHECK(link_duplicates(g.records, g.infs).empty());
  }
  SUBCASE("distinct names give an empty report") {
    Fixture g;
    g.add("A", "1", "One", Gender::Man);
    g.add("A", "2", "Two", Gender::Man);
    CHECK(link_duplicates(g.records, g.infs).empty());
  }
  SUBCASE("repairs csv round trip") {
    auto text = repairs_to_csv(proposals);
    auto back = parse_repairs_csv(text);
    CHECK(repairs_to_csv(back) == text);
  }
}

TEST_CASE("reference cross-tab of reference men") {
  // 198 men in the reference: 191 inferred men, 7 with no confident inference.
  Fixture f;
  std::vector<ReferenceRow> ref;
  for (int i = 0; i < 198; ++i) {
    std::string name = "Man " + std::to_string(i);
    f.add("NAMA", std::to_string(i), name, i < 191 ? std::optional(Gender::Man) : std::nullopt);
    ref.push_back({name, Attribute::Gender, "Man"});
  }
  auto cmp = compare_reference(f.records, f.infs, ref, Attribute::Gender);
  CHECK(cmp.cell("man", "man") == 191);
  CHECK(cmp.cell("man", "woman") == 0);
  CHECK(cmp.cell("man", "unknown") == 7);
  CHECK(cmp.compared == 198);
  CHECK(cmp.row_total("man") == 198);
  CHECK(*cmp.agreement_rate == doctest::Approx(191.0 / 198));
}

TEST_CASE("reference cross-tab of reference women with unsampled names") {
  Fixture f;
  std::vector<ReferenceRow> ref;
  for (int i = 0; i < 68; ++i) {
    std::string name = "Woman " + std::to_string(i);
    ref.push_back({name, Attribute::Gender, "woman"});
    if (i >= 55) continue;  // 13 never sampled
    std::optional<Gender> g = i < 43 ? std::optional(Gender::Woman) : i == 43 ? std::optional(Gender::Man)
                                                                               : std::nullopt;
    f.add("NAMA", std::to_string(i), name, g);
  }
  auto cmp = compare_reference(f.records, f.infs, ref, Attribute::Gender);
  CHECK(cmp.cell("woman", "woman") == 43);
  CHECK(cmp.cell("woman", "man") == 1);
  CHECK(cmp.cell("woman", "unknown") == 11);
  CHECK(cmp.cell("woman", "not_sampled") == 13);
  int total = 0;
  for (const auto& o : cmp.outcomes) total += cmp.column_total(o);
  CHECK(total == cmp.compared);
  CHECK(cmp.labeled_sampled == 55);

  CHECK(compare_reference(f.records, f.infs, {}, Attribute::Gender).compared == 0);
}

TEST_CASE("reference matching by record key and collection") {
  Fixture f;
  f.add("A", "1", "Same Name", Gender::Man);
  f.add("B", "1", "Same Name", Gender::Woman);
  std::vector<ReferenceRow> ref = {{"B:1", Attribute::Gender, "woman"}};
  CHECK(compare_reference(f.records, f.infs, ref, Attribute::Gender).cell("woman", "woman") == 1);
  ref = {{"Same Name", Attribute::Gender, "woman"}};
  CHECK(compare_reference(f.records, f.infs, ref, Attribute::Gender).cell("woman", "conflict") == 1);
  CHECK(compare_reference(f.records, f.infs, ref, Attribute::Gender, std::string("A")).cell("woman", "man") == 1);
}
