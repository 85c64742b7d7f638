#include <doctest.h>

#include <algorithm>
#include <random>

#include "crowdcensus/csv.hpp"
#include "crowdcensus/error.hpp"
#include "crowdcensus/ingest.hpp"
#include "crowdcensus/rational.hpp"
#include "crowdcensus/region_map.hpp"
#include "fixtures.hpp"
#include "oracles.hpp"

using namespace crowdcensus;

namespace {
const std::string kRecHeader = std::string(ingest::kRecordsHeader) + "\n";
const std::string kRespHeader = std::string(ingest::kResponsesHeader) + "\n";
}  // namespace

TEST_CASE("rational arithmetic is exact") {
  CHECK(Rational(2, 6) == Rational(1, 3));
  CHECK(Rational(1, 3) + Rational(1, 3) + Rational(1, 3) == Rational(1));
  CHECK(Rational::parse("0.65") == Rational(13, 20));
  CHECK(Rational::parse("-2/3") == Rational(-2, 3));
  CHECK(Rational(-7, 2).floor() == -4);
  CHECK(Rational(13, 20) < Rational(2, 3));
  CHECK_THROWS(Rational::parse("abc"));
  CHECK_THROWS(Rational(1, 0));
}

TEST_CASE("csv quoting round-trips") {
  std::string text = "a,b\n\"x, y\",\"he said \"\"hi\"\"\"\n\"multi\nline\",z\n";
  auto t = csv::parse(text);
  REQUIRE(t.rows.size() == 2);
  CHECK(t.rows[0][0] == "x, y");
  CHECK(t.rows[0][1] == "he said \"hi\"");
  CHECK(t.rows[1][0] == "multi\nline");
  CHECK(t.line_numbers[1] == 3);
  CHECK(csv::to_string(t) == text);
}

TEST_CASE("parse_records") {
  SUBCASE("direct field mapping") {
    auto recs = ingest::parse_records(kRecHeader +
                                      "WMAA,a17,Rachel Lachowicz,https://whitney.org/artists/17,2017-06-02\n");
    REQUIRE(recs.size() == 1);
    CHECK(recs[0].key.collection_id == "WMAA");
    CHECK(recs[0].key.entity_id == "a17");
    CHECK(recs[0].display_name == "Rachel Lachowicz");
    CHECK(recs[0].source_url == "https://whitney.org/artists/17");
    CHECK(recs[0].scrape_date == "2017-06-02");
  }
  SUBCASE("header only") { CHECK(ingest::parse_records(kRecHeader).empty()); }
  SUBCASE("blank and unknown names are ordinary records") {
    auto recs = ingest::parse_records(kRecHeader + "A,1,,,2017-06-02\nA,2,Unknown,,2017-06-02\n");
    REQUIRE(recs.size() == 2);
    CHECK(recs[0].display_name.empty());
    CHECK(recs[1].display_name == "Unknown");
  }
  SUBCASE("duplicate key") {
    CHECK_THROWS_AS(ingest::parse_records(kRecHeader + "WMAA,a17,A,,2017-06-02\nWMAA,a17,B,,2017-06-02\n"),
                    DuplicateKey);
  }
  SUBCASE("missing column") {
    CHECK_THROWS_AS(ingest::parse_records("collection_id,entity_id\nA,b\n"), MissingColumn);
  }
  SUBCASE("malformed row carries the line number") {
    try {
      ingest::parse_records(kRecHeader + "A,1,Ok,,2017-06-02\nA,,X,,2017-06-02\n");
      FAIL("expected MalformedRow");
    } catch (const MalformedRow& e) {
      CHECK(std::string(e.what()).find("line 3") != std::string::npos);
    }
  }
  SUBCASE("json has the same fields") {
    auto recs = ingest::parse_records_json(
        R"([{"collection_id":"A","entity_id":"1","display_name":"X","source_url":"","scrape_date":"2017-01-01"}])");
    REQUIRE(recs.size() == 1);
    CHECK(recs[0].display_name == "X");
  }
}

TEST_CASE("parse_responses") {
  std::string text = kRespHeader +
                     "H1,W1,A,1,42.5,yes,woman,3,white|aian,Irish,2,USA,3,1850,3\n"
                     "H2,W2,A,1,10,no,notiia,1,notiia,,1,notiia,1,,\n"
                     "H3,W3,A,1,20,yes,man,,unknown,,2,France,,1901,1\n";
  auto parsed = ingest::parse_responses(text);
  REQUIRE(parsed.responses.size() == 3);
  const auto& a = parsed.responses[0];
  CHECK(a.duration_secs == 42.5);
  CHECK(a.gender->category == GenderAnswer::Woman);
  CHECK(a.ethnicity->categories == std::vector<Ethnicity>{Ethnicity::White, Ethnicity::AmericanIndian});
  CHECK(a.ethnicity->free_text == "Irish");
  CHECK(a.origin->country == "USA");
  CHECK(a.birth->raw == "1850");
  CHECK(parsed.responses[1].ethnicity->status == AnswerStatus::NotIia);
  // missing confidence drops only that answer
  const auto& c = parsed.responses[2];
  CHECK_FALSE(c.gender.has_value());
  CHECK_FALSE(c.origin.has_value());
  CHECK(c.ethnicity->status == AnswerStatus::CannotDetermine);
  CHECK(c.birth->raw == "1901");
  CHECK(parsed.warnings.size() == 2);
  CHECK(parsed.warnings[0].line == 4);

  CHECK_THROWS_AS(ingest::parse_responses(kRespHeader + "H1,W1,A,1,-3,yes,,,,,,,,,\n"), MalformedRow);
  CHECK_THROWS_AS(ingest::parse_responses(kRespHeader + "H1,W1,A,1,3,maybe,,,,,,,,,\n"), MalformedRow);
  CHECK_THROWS_AS(ingest::parse_responses(kRespHeader + "H1,W1,A,1,3,yes,man,4,,,,,,,\n"), MalformedRow);

  // serialize(parse(x)) == x for canonical input
  std::string canonical = text.substr(0, text.find("H3,"));
  CHECK(ingest::responses_to_csv(ingest::parse_responses(canonical).responses) == canonical);
}

TEST_CASE("firm prefilter") {
  CHECK(ingest::has_firm_marker("Amstel Porcelain Company"));
  CHECK_FALSE(ingest::has_firm_marker("Bai Yiluo"));
  CHECK(ingest::has_firm_marker("Smith & Sons"));
  CHECK(ingest::has_firm_marker("Tiffany & Co."));
  CHECK(ingest::has_firm_marker("JONES & SONS"));
  CHECK_FALSE(ingest::has_firm_marker("Tiffany &Co"));

  SUBCASE("names without markers are always kept") {
    std::mt19937_64 rng(5);
    const std::string alphabet = "abcdefgh &SonsCOmpanyy.";
    for (int i = 0; i < 5000; ++i) {
      std::string name;
      int len = 1 + static_cast<int>(rng() % 20);
      for (int j = 0; j < len; ++j) name += alphabet[rng() % alphabet.size()];
      std::string lower = name;
      std::transform(lower.begin(), lower.end(), lower.begin(), [](unsigned char ch) { return std::tolower(ch); });
      bool marked = lower.find("company") != std::string::npos || lower.find("& co") != std::string::npos ||
                    lower.find("& sons") != std::string::npos;
      CHECK(ingest::has_firm_marker(name) == marked);
    }
  }
  SUBCASE("partition") {
    std::vector<EntityRecord> recs = {fx::record("A", "1", "Acme Company"), fx::record("A", "2", "Jane Doe")};
    auto r = ingest::prefilter_firms(recs);
    CHECK(r.kept.size() == 1);
    CHECK(r.dropped.size() == 1);
    CHECK(r.dropped[0].display_name == "Acme Company");
  }
}

TEST_CASE("pool_responses") {
  std::vector<EntityRecord> recs = {fx::record("A", "1", "X"), fx::record("A", "2", "Y")};
  SUBCASE("two deployments merge") {
    std::vector<AnnotationResponse> rs;
    for (int i = 0; i < 10; ++i) {
      auto r = fx::base(i, IiaAnswer::Yes, "A", "1");
      r.hit_id = (i < 5 ? "D1-" : "D2-") + std::to_string(i);
      rs.push_back(r);
    }
    auto pool = ingest::pool_responses(rs, recs);
    REQUIRE(pool.entries.size() == 2);
    CHECK(pool.entries[0].responses.size() == 10);
    CHECK(pool.entries[1].responses.empty());
    CHECK(pool.total_responses() == 10);
  }
  SUBCASE("orphan") {
    CHECK_THROWS_AS(ingest::pool_responses({fx::base(1, IiaAnswer::Yes, "B", "9")}, recs), OrphanResponse);
  }
  SUBCASE("permutation invariant") {
    std::mt19937_64 rng(3);
    std::vector<AnnotationResponse> rs;
    std::vector<std::string> countries = {"USA", "France"};
    for (int i = 0; i < 40; ++i) {
      auto r = oracle::fuzz_response(rng, countries, i);
      r.record = recs[static_cast<std::size_t>(i % 2)].key;
      rs.push_back(r);
    }
    auto first = ingest::pool_to_csv(ingest::pool_responses(rs, recs));
    for (int k = 0; k < 10; ++k) {
      std::shuffle(rs.begin(), rs.end(), rng);
      CHECK(ingest::pool_to_csv(ingest::pool_responses(rs, recs)) == first);
    }
  }
}

TEST_CASE("region map normalization") {
  const auto& m = RegionMap::builtin();
  CHECK(m.lookup("USA") == Region::NorthAmerica);
  CHECK(m.lookup(" u.s. ") == Region::NorthAmerica);
  CHECK(m.lookup("united states") == Region::NorthAmerica);
  CHECK(m.lookup("Denmark") == Region::Europe);
  CHECK_FALSE(m.lookup("Atlantis"));
  auto custom = RegionMap::from_csv("country,region\nAtlantis,Polar\nHy Brasil,europe\n");
  CHECK(custom.lookup("atlantis") == Region::Polar);
  CHECK(custom.lookup("HY  BRASIL") == Region::Europe);
}
