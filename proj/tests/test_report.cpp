#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "crowdcensus/csv.hpp"
#include "crowdcensus/error.hpp"
#include "crowdcensus/pipeline.hpp"
#include "crowdcensus/synth.hpp"
#include "fixtures.hpp"
#include "json.hpp"

using namespace crowdcensus;
namespace fs = std::filesystem;

namespace {

struct Inputs {
  std::string dir;
  report::PipelineInputs paths;
};

Inputs campaign_files(const std::string& name, const std::string& spec_json, std::uint64_t seed) {
  Inputs in;
  in.dir = fx::scratch(name);
  auto c = synth::generate(synth::parse_spec_json(spec_json), seed);
  pipeline::write_file(in.dir, "records.csv", ingest::records_to_csv(c.records));
  pipeline::write_file(in.dir, "responses.csv", ingest::responses_to_csv(c.responses));
  in.paths.records = in.dir + "/records.csv";
  in.paths.responses = in.dir + "/responses.csv";
  return in;
}

const char* kSpec = R"({"world":{"collections":4,"records_per_collection":60},
  "workers":{"honest":{"count":12,"accuracy":0.95},"spammer":{"count":1}}})";

std::map<std::string, std::string> snapshot(const std::string& dir) {
  std::map<std::string, std::string> out;
  for (const auto& e : fs::directory_iterator(dir)) out[e.path().filename().string()] = pipeline::read_file(e.path());
  return out;
}

}  // namespace

TEST_CASE("coverage table percentages") {
  report::PipelineRun run;
  run.ingest.emplace();
  for (int i = 0; i < 5; ++i) run.ingest->all_records.push_back(fx::record("A", std::to_string(i), "n"));
  run.infer.emplace();
  run.infer->tallies = {{"A", 3, 2, 1, 2, 0, 1}, {"Overall", 3, 2, 1, 2, 0, 1}};
  auto t = report::emit_table1(run);
  auto table = csv::parse(t.csv);
  REQUIRE(table.rows.size() == 2);
  csv::RowView a(table, 0);
  CHECK(a["scraped"] == "5");
  CHECK(a["iia_pct"] == "66.7");
  CHECK(a["cgi_pct"] == "50.0");
  CHECK(a["cei_pct"] == "100.0");
  CHECK(a["cri_pct"] == "0.0");
  CHECK(csv::RowView(table, 1)["scraped"] == "5");

  report::PipelineRun empty;
  CHECK_THROWS_AS(report::emit_table1(empty), StageMissing);
  CHECK_THROWS_AS(report::emit_table2(empty), StageMissing);
  CHECK_THROWS_AS(report::emit_fig2_data(empty), StageMissing);
}

TEST_CASE("figure data on the published profiles") {
  auto profiles = stats::parse_profiles_csv(pipeline::read_file(fx::data_dir() + "/published_profiles.csv"));
  report::PipelineRun run;
  std::vector<std::string> notes;
  run.cluster = pipeline::run_cluster(profiles, ClusterConfig{}, notes);
  CHECK(notes.empty());
  auto doc = nlohmann::json::parse(report::emit_fig2_data(run));
  bool found = false;
  for (const auto& pt : doc["panel_a"]["points"]) {
    CHECK(pt["x"].get<double>() >= 0);
    CHECK(pt["y"].get<double>() <= 1);
    if (pt["group"] == "WMAA") {
      found = true;
      CHECK(pt["x"].get<double>() == doctest::Approx(0.847));
      CHECK(pt["y"].get<double>() == doctest::Approx(130.0 / 147));
      CHECK(pt["avg_birth_year"].get<double>() == 1932);
    }
  }
  CHECK(found);
  CHECK(doc["panel_b"]["points"].size() == 18);
  CHECK(doc["panel_c"]["total"] == 18);
  int sum = 0;
  for (const auto& cell : doc["panel_c"]["cells"]) sum += cell["count"].get<int>();
  CHECK(sum == 18);
  CHECK(report::emit_fig2_svg(run).find("<svg") == 0);

  std::vector<std::string> clamp_notes;
  ClusterConfig big;
  big.mission_k = 40;
  auto c = pipeline::run_cluster(profiles, big, clamp_notes);
  CHECK(c.mission.partition.clusters.size() == 18);
  CHECK(clamp_notes.size() == 1);
}

TEST_CASE("end-to-end run") {
  auto in = campaign_files("e2e_inputs", kSpec, 11);
  pipeline::RunOptions opt;
  opt.inputs = in.paths;
  opt.out_dir = fx::scratch("e2e_out");
  auto run = pipeline::run_pipeline(opt);
  REQUIRE(run.stats);
  REQUIRE(run.cluster);
  for (auto name : {"records.csv", "inferences.csv", "coverage.csv", "stats.csv", "table1.csv", "table2.csv",
                    "fig2.json", "manifest.json", "mission_partition.csv"}) {
    INFO(name);
    CHECK(fs::exists(opt.out_dir + "/" + name));
  }
  for (const auto& [name, content] : snapshot(opt.out_dir)) {
    if (name.ends_with(".csv")) CHECK_NOTHROW(csv::parse(content));
    if (name.ends_with(".json")) CHECK(nlohmann::json::accept(content));
  }

  auto t1 = csv::parse(report::emit_table1(run).csv);
  REQUIRE(t1.rows.size() == 5);
  for (const char* col : {"scraped", "sampled", "iia", "cgi", "cei", "cri", "cbi"}) {
    int sum = 0;
    for (std::size_t i = 0; i + 1 < t1.rows.size(); ++i) sum += std::stoi(csv::RowView(t1, i)[col]);
    CHECK(std::to_string(sum) == csv::RowView(t1, 4)[col]);
  }
  auto t2 = csv::parse(report::emit_table2(run).csv);
  CHECK(csv::RowView(t2, t2.rows.size() - 1)["collection"] == "Overall");

  auto manifest = nlohmann::json::parse(pipeline::read_file(opt.out_dir + "/manifest.json"));
  CHECK(manifest["timestamp"].is_null());

  SUBCASE("repeat runs are byte identical") {
    auto again = opt;
    again.out_dir = fx::scratch("e2e_again");
    pipeline::run_pipeline(again);
    CHECK(snapshot(again.out_dir) == snapshot(opt.out_dir));
  }
}

TEST_CASE("stage failures carry exit codes") {
  CHECK(pipeline::exit_code(pipeline::Stage::Ingest) == 10);
  CHECK(pipeline::exit_code(pipeline::Stage::Report) == 16);
  pipeline::RunOptions opt;
  opt.inputs.records = "/nonexistent/records.csv";
  opt.inputs.responses = "/nonexistent/responses.csv";
  opt.out_dir = fx::scratch("fail");
  try {
    pipeline::run_pipeline(opt);
    FAIL("expected a stage failure");
  } catch (const pipeline::StageFailure& e) {
    CHECK(e.stage() == pipeline::Stage::Ingest);
    CHECK(e.exit_code() == 10);
  }

  auto in = campaign_files("bad_exclusions", kSpec, 3);
  pipeline::write_file(in.dir, "exclusions.csv", "nope\nx\n");
  opt.inputs = in.paths;
  opt.inputs.exclusions = in.dir + "/exclusions.csv";
  try {
    pipeline::run_pipeline(opt);
    FAIL("expected a stage failure");
  } catch (const pipeline::StageFailure& e) {
    CHECK(e.exit_code() == 11);
  }
}

TEST_CASE("config file") {
  auto cfg = PipelineConfig::parse("# comment\nmin_support = 4\nalpha=0.01\nlinkage = wpgma\n");
  CHECK(cfg.campaign.min_support == 4);
  CHECK(cfg.stats.alpha == 0.01);
  CHECK(cfg.cluster.linkage == Linkage::Wpgma);
  CHECK(PipelineConfig::parse(cfg.to_text()).to_text() == cfg.to_text());
  CHECK_THROWS_AS(PipelineConfig::parse("nonsense = 1\n"), ConfigError);
  CHECK_THROWS_AS(PipelineConfig::parse("gender_threshold = 2\n"), ConfigError);
}
