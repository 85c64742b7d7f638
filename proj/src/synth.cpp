#include "crowdcensus/synth.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <sstream>

#include <fmt/format.h>

#include "json.hpp"

#include "crowdcensus/csv.hpp"
#include "crowdcensus/error.hpp"
#include "crowdcensus/ingest.hpp"
#include "crowdcensus/random.hpp"

namespace crowdcensus::synth {
namespace {

using Rng = std::mt19937_64;
using nlohmann::json;

constexpr std::uint64_t kWorldStream = 0x77a1d5e3c0ffee01ULL;
constexpr std::uint64_t kResponseStream = 0x5eedf00dba5eba11ULL;

const std::array<std::vector<std::string_view>, kNumRegions> kCountries = {{
    {"Nigeria", "Ghana", "Kenya", "South Africa"},
    {"Japan", "China", "India", "Australia"},
    {"France", "Italy", "Germany", "Netherlands", "Spain", "United Kingdom"},
    {"Mexico", "Brazil", "Argentina", "Cuba"},
    {"United States", "Canada"},
    {"Iraq", "Syria", "Saudi Arabia", "Lebanon"},
    {"Greenland"},
}};

constexpr std::array<std::string_view, 16> kGiven = {"Ada",  "Bruno", "Clara", "Dmitri", "Elena", "Farid",
                                                     "Greta", "Hiro", "Ines", "Jonas", "Kemi", "Luca",
                                                     "Mira", "Nils", "Oona", "Pablo"};
constexpr std::array<std::string_view, 16> kSyllables = {"ba", "ken", "lor", "mi", "dan", "sel", "tor", "vi",
                                                         "ra", "ost", "nel", "qui", "har", "zen", "por", "ul"};

struct Entity {
  std::string name;
  TruthRow truth;
  Ethnicity ethnicity = Ethnicity::White;
  std::string country;
};

struct PlannedRecord {
  EntityRecord record;
  TruthRow truth;
  Ethnicity ethnicity = Ethnicity::White;
  std::string country;
  bool deployed = false;
};

double uniform(Rng& rng) { return std::uniform_real_distribution<double>(0, 1)(rng); }
bool bernoulli(Rng& rng, double p) { return uniform(rng) < p; }

template <typename T>
const T& pick(Rng& rng, const std::vector<T>& v) {
  return v[std::uniform_int_distribution<std::size_t>(0, v.size() - 1)(rng)];
}

template <std::size_t N>
std::size_t categorical(Rng& rng, const std::array<double, N>& probs) {
  double u = uniform(rng), acc = 0;
  std::size_t last = 0;
  for (std::size_t i = 0; i < N; ++i) {
    if (probs[i] <= 0) continue;
    acc += probs[i];
    last = i;
    if (u < acc) return i;
  }
  return last;
}

// Distinct for distinct indices: the index is written in base 16 syllables.
std::string surname(std::size_t index) {
  std::string s;
  do {
    s += kSyllables[index % 16];
    index /= 16;
  } while (index > 0);
  s[0] = static_cast<char>(std::toupper(static_cast<unsigned char>(s[0])));
  return s;
}

Ethnicity representative(EthnicityGroup g, Rng& rng) {
  switch (g) {
    case EthnicityGroup::Asian: return Ethnicity::Asian;
    case EthnicityGroup::Black: return Ethnicity::Black;
    case EthnicityGroup::Hispanic: return Ethnicity::Hispanic;
    case EthnicityGroup::White: return Ethnicity::White;
    case EthnicityGroup::Other: break;
  }
  static const std::vector<Ethnicity> rare = {Ethnicity::AmericanIndian, Ethnicity::PacificIslander,
                                              Ethnicity::MiddleEastern};
  return pick(rng, rare);
}

std::string country_in(Region r, Rng& rng) {
  const auto& list = kCountries[static_cast<std::size_t>(r)];
  return std::string(list[std::uniform_int_distribution<std::size_t>(0, list.size() - 1)(rng)]);
}

Entity new_entity(const CollectionSpec& c, std::size_t entity_index, Rng& rng) {
  Entity e;
  e.name = std::string(kGiven[entity_index % kGiven.size()]) + " " + surname(entity_index / kGiven.size());
  e.truth.iia = true;
  e.truth.gender = bernoulli(rng, c.woman_rate) ? Gender::Woman : Gender::Man;
  auto group = kAllEthnicityGroups[categorical(rng, c.ethnicity)];
  e.truth.ethnicity = group;
  e.ethnicity = representative(group, rng);
  auto region = kAllRegions[categorical(rng, c.region)];
  e.truth.region = region;
  e.country = country_in(region, rng);
  double year = std::normal_distribution<double>(c.birth_mean, c.birth_sd)(rng);
  e.truth.birth_year = static_cast<int>(std::clamp(std::round(year), 1000.0, 2005.0));
  return e;
}

// Duplicates refer back to entities of earlier collections. Each record
// draws from its own stream.
std::vector<PlannedRecord> plan_world(const WorldSpec& world, std::uint64_t seed) {
  std::vector<PlannedRecord> out;
  std::vector<Entity> earlier;  // IIA entities of previous collections
  std::size_t entity_counter = 0, global = 0;
  for (const auto& c : world.collections) {
    std::vector<Entity> current;
    for (int r = 0; r < c.records; ++r, ++global) {
      Rng rng(derive_seed(seed ^ kWorldStream, global));
      PlannedRecord p;
      p.record.key = {c.id, fmt::format("e{:05d}", r)};
      p.record.source_url = fmt::format("https://collections.example.org/{}/{:05d}", c.id, r);
      p.record.scrape_date = "2017-06-28";
      p.truth.key = p.record.key;
      bool firm = bernoulli(rng, world.firm_rate);
      bool iia = bernoulli(rng, world.iia_rate);
      bool duplicate = bernoulli(rng, world.duplicate_rate);
      p.deployed = !firm && bernoulli(rng, world.deploy_rate);
      if (firm) {
        p.record.display_name = surname(global) + " & Sons";
      } else if (!iia) {
        static const std::vector<std::string> anon = {"Unknown", "Unknown Artist", "Anonymous", "Unidentified Maker"};
        p.record.display_name = bernoulli(rng, 0.5) ? pick(rng, anon) : "Workshop of " + surname(global);
      } else {
        Entity e = duplicate && !earlier.empty() ? pick(rng, earlier) : new_entity(c, entity_counter++, rng);
        p.record.display_name = e.name;
        p.truth = e.truth;
        p.truth.key = p.record.key;
        p.ethnicity = e.ethnicity;
        p.country = e.country;
        current.push_back(std::move(e));
      }
      out.push_back(std::move(p));
    }
    earlier.insert(earlier.end(), current.begin(), current.end());
  }
  return out;
}

struct Worker {
  std::string id;
  Archetype archetype;
  double accuracy;
  double weight;
};

std::vector<Worker> roster(const WorkerSpec& w) {
  std::vector<Worker> out;
  auto add = [&](const ArchetypeSpec& a, Archetype kind) {
    for (int i = 0; i < a.count; ++i) {
      out.push_back({fmt::format("W{:04d}", out.size() + 1), kind, a.accuracy, a.volume_weight});
    }
  };
  add(w.honest, Archetype::Honest);
  add(w.sloppy, Archetype::Sloppy);
  add(w.spammer, Archetype::Spammer);
  return out;
}

std::vector<std::size_t> choose_workers(const std::vector<double>& cumulative, int k, Rng& rng) {
  std::vector<std::size_t> chosen;
  std::uniform_real_distribution<double> u(0, cumulative.back());
  while (static_cast<int>(chosen.size()) < k) {
    auto idx = static_cast<std::size_t>(std::upper_bound(cumulative.begin(), cumulative.end(), u(rng)) -
                                        cumulative.begin());
    idx = std::min(idx, cumulative.size() - 1);
    if (std::find(chosen.begin(), chosen.end(), idx) == chosen.end()) chosen.push_back(idx);
  }
  return chosen;
}

Confidence confidence(const Worker& w, bool correct, Rng& rng) {
  if (w.archetype == Archetype::Sloppy) {
    return correct && bernoulli(rng, 0.5) ? Confidence::Medium : Confidence::Low;
  }
  if (correct) return bernoulli(rng, w.accuracy) ? Confidence::High : Confidence::Medium;
  return bernoulli(rng, 0.5) ? Confidence::Low : Confidence::Medium;
}

Confidence random_confidence(Rng& rng) {
  return static_cast<Confidence>(std::uniform_int_distribution<int>(1, 3)(rng));
}

void answer_not_iia(AnnotationResponse& r, Confidence c) {
  r.iia = IiaAnswer::No;
  r.gender = GenderResponse{GenderAnswer::NotIia, c};
  r.ethnicity = EthnicityResponse{AnswerStatus::NotIia, {}, "", c};
  r.origin = OriginResponse{AnswerStatus::NotIia, "", c};
}

void answer_randomly(AnnotationResponse& r, Rng& rng, bool random_confidences) {
  auto conf = [&] { return random_confidences ? random_confidence(rng) : Confidence::Low; };
  r.iia = IiaAnswer::Yes;
  r.gender = GenderResponse{bernoulli(rng, 0.5) ? GenderAnswer::Woman : GenderAnswer::Man, conf()};
  auto eth = static_cast<Ethnicity>(std::uniform_int_distribution<int>(0, kNumEthnicities - 1)(rng));
  r.ethnicity = EthnicityResponse{AnswerStatus::Answered, {eth}, "", conf()};
  auto region = static_cast<Region>(std::uniform_int_distribution<int>(0, kNumRegions - 1)(rng));
  r.origin = OriginResponse{AnswerStatus::Answered, country_in(region, rng), conf()};
  r.birth = BirthResponse{std::to_string(std::uniform_int_distribution<int>(1300, 2000)(rng)), conf()};
}

void answer_faithfully(AnnotationResponse& r, const PlannedRecord& p, const Worker& w, const WorkerSpec& spec,
                       Rng& rng) {
  const TruthRow& t = p.truth;
  r.iia = IiaAnswer::Yes;

  bool ok = bernoulli(rng, w.accuracy);
  Gender g = ok ? *t.gender : (*t.gender == Gender::Man ? Gender::Woman : Gender::Man);
  r.gender = GenderResponse{g == Gender::Man ? GenderAnswer::Man : GenderAnswer::Woman, confidence(w, ok, rng)};

  ok = bernoulli(rng, w.accuracy);
  Ethnicity eth = p.ethnicity;
  if (!ok) {
    std::vector<EthnicityGroup> others;
    for (auto grp : kAllEthnicityGroups) {
      if (grp != *t.ethnicity) others.push_back(grp);
    }
    eth = representative(pick(rng, others), rng);
  }
  r.ethnicity = EthnicityResponse{AnswerStatus::Answered, {eth}, "", confidence(w, ok, rng)};

  ok = bernoulli(rng, w.accuracy);
  std::string country = p.country;
  if (!ok) {
    std::vector<Region> others;
    for (auto reg : kAllRegions) {
      if (reg != *t.region) others.push_back(reg);
    }
    country = country_in(pick(rng, others), rng);
  }
  r.origin = OriginResponse{AnswerStatus::Answered, country, confidence(w, ok, rng)};

  ok = bernoulli(rng, w.accuracy);
  int year = *t.birth_year;
  if (ok) {
    if (spec.birth_sigma > 0) {
      year += static_cast<int>(std::round(std::normal_distribution<double>(0, spec.birth_sigma)(rng)));
    }
    if (bernoulli(rng, spec.typo_rate)) year += bernoulli(rng, 0.5) ? 1 : -1;
  } else {
    int offset = std::uniform_int_distribution<int>(25, 120)(rng);
    year += bernoulli(rng, 0.5) ? offset : -offset;
  }
  r.birth = BirthResponse{std::to_string(std::clamp(year, 1000, 2020)), confidence(w, ok, rng)};
}

double duration(Archetype a, Rng& rng) {
  double d;
  switch (a) {
    case Archetype::Honest: d = std::gamma_distribution<double>(4.0, 26.5)(rng); break;
    case Archetype::Sloppy: d = std::gamma_distribution<double>(2.5, 25.0)(rng); break;
    default: d = std::uniform_real_distribution<double>(3.0, 30.0)(rng); break;
  }
  return std::round(d * 10) / 10;
}

std::vector<AnnotationResponse> respond(const PlannedRecord& p, std::size_t index, const std::vector<Worker>& workers,
                                        const std::vector<double>& cumulative, const WorkerSpec& spec,
                                        std::uint64_t seed) {
  Rng rng(derive_seed(seed ^ kResponseStream, index));
  std::vector<AnnotationResponse> out;
  int slot = 0;
  for (std::size_t wi : choose_workers(cumulative, spec.responses_per_record, rng)) {
    const Worker& w = workers[wi];
    AnnotationResponse r;
    r.hit_id = fmt::format("H{:07d}-{}", index, ++slot);
    r.worker_id = w.id;
    r.record = p.record.key;
    r.duration_secs = duration(w.archetype, rng);
    if (w.archetype == Archetype::Spammer) {
      if (bernoulli(rng, 0.5)) answer_randomly(r, rng, true);
      else answer_not_iia(r, random_confidence(rng));
    } else {
      bool says_iia = p.truth.iia == bernoulli(rng, w.accuracy);
      if (!says_iia) answer_not_iia(r, confidence(w, true, rng));
      else if (p.truth.iia) answer_faithfully(r, p, w, spec, rng);
      else answer_randomly(r, rng, false);
    }
    out.push_back(std::move(r));
  }
  return out;
}

Campaign assemble(const SynthSpec& spec, std::uint64_t seed, bool parallel) {
  spec.validate();
  auto planned = plan_world(spec.world, seed);
  auto workers = roster(spec.workers);
  std::vector<double> cumulative;
  double acc = 0;
  for (const auto& w : workers) cumulative.push_back(acc += w.weight);

  std::vector<std::vector<AnnotationResponse>> per_record(planned.size());
  const std::ptrdiff_t n = static_cast<std::ptrdiff_t>(planned.size());
  #pragma omp parallel for schedule(dynamic, 32) if (parallel)
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    if (planned[i].deployed) {
      per_record[i] = respond(planned[i], static_cast<std::size_t>(i), workers, cumulative, spec.workers, seed);
    }
  }

  Campaign c;
  for (std::size_t i = 0; i < planned.size(); ++i) {
    c.records.push_back(planned[i].record);
    c.truth.push_back(planned[i].truth);
    for (auto& r : per_record[i]) c.responses.push_back(std::move(r));
  }
  std::vector<std::size_t> order(c.records.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return c.records[a].key < c.records[b].key; });
  std::vector<EntityRecord> records;
  std::vector<TruthRow> truth;
  for (auto i : order) {
    records.push_back(std::move(c.records[i]));
    truth.push_back(std::move(c.truth[i]));
  }
  c.records = std::move(records);
  c.truth = std::move(truth);
  std::stable_sort(c.responses.begin(), c.responses.end(), [](const auto& a, const auto& b) {
    if (a.record != b.record) return a.record < b.record;
    return ingest::response_less(a, b);
  });
  for (const auto& w : workers) c.workers[w.id] = w.archetype;
  return c;
}

void read_archetype(const json& j, const char* name, ArchetypeSpec& a) {
  if (!j.contains(name)) return;
  const json& x = j.at(name);
  a.count = x.value("count", a.count);
  a.accuracy = x.value("accuracy", a.accuracy);
  a.volume_weight = x.value("volume_weight", a.volume_weight);
}

template <std::size_t N, typename E>
void read_distribution(const json& j, const char* name, std::array<double, N>& out, const std::array<E, N>& keys) {
  if (!j.contains(name)) return;
  std::array<double, N> d{};
  for (const auto& [k, v] : j.at(name).items()) {
    bool found = false;
    for (std::size_t i = 0; i < N; ++i) {
      if (to_token(keys[i]) == k) {
        d[i] = v.template get<double>();
        found = true;
      }
    }
    if (!found) throw InvalidSpec(fmt::format("unknown category '{}' in {}", k, name));
  }
  out = d;
}

void read_collection(const json& j, CollectionSpec& c) {
  c.id = j.value("id", c.id);
  c.records = j.value("records", c.records);
  c.woman_rate = j.value("woman_rate", c.woman_rate);
  read_distribution(j, "ethnicity", c.ethnicity, kAllEthnicityGroups);
  read_distribution(j, "region", c.region, kAllRegions);
  c.birth_mean = j.value("birth_mean", c.birth_mean);
  c.birth_sd = j.value("birth_sd", c.birth_sd);
}

template <std::size_t N>
void check_distribution(const std::array<double, N>& d, const std::string& what) {
  double s = 0;
  for (double x : d) {
    if (x < 0 || x > 1) throw InvalidSpec(what + " has a probability outside [0,1]");
    s += x;
  }
  if (std::abs(s - 1) > 1e-6) throw InvalidSpec(fmt::format("{} sums to {}, not 1", what, s));
}

void check_rate(double x, const std::string& what) {
  if (!(x >= 0 && x <= 1)) throw InvalidSpec(what + " must lie in [0,1]");
}

json distribution_json(const auto& d, const auto& keys) {
  json j = json::object();
  for (std::size_t i = 0; i < d.size(); ++i) j[std::string(to_token(keys[i]))] = d[i];
  return j;
}

}  // namespace

void SynthSpec::validate() const {
  if (world.collections.empty()) throw InvalidSpec("at least one collection is required");
  std::vector<std::string> ids;
  for (const auto& c : world.collections) {
    if (c.id.empty()) throw InvalidSpec("collection id is empty");
    if (c.records < 0) throw InvalidSpec("collection " + c.id + " has a negative record count");
    check_rate(c.woman_rate, "woman_rate of " + c.id);
    check_distribution(c.ethnicity, "ethnicity of " + c.id);
    check_distribution(c.region, "region of " + c.id);
    if (c.birth_sd < 0) throw InvalidSpec("birth_sd of " + c.id + " is negative");
    ids.push_back(c.id);
  }
  std::sort(ids.begin(), ids.end());
  if (std::adjacent_find(ids.begin(), ids.end()) != ids.end()) throw InvalidSpec("collection ids must be unique");
  check_rate(world.iia_rate, "iia_rate");
  check_rate(world.duplicate_rate, "duplicate_rate");
  check_rate(world.firm_rate, "firm_rate");
  check_rate(world.deploy_rate, "deploy_rate");

  int eligible = 0;
  for (const auto* a : {&workers.honest, &workers.sloppy, &workers.spammer}) {
    if (a->count < 0) throw InvalidSpec("worker counts must be non-negative");
    check_rate(a->accuracy, "worker accuracy");
    if (a->volume_weight < 0) throw InvalidSpec("volume_weight must be non-negative");
    if (a->volume_weight > 0) eligible += a->count;
  }
  if (workers.responses_per_record < 1) throw InvalidSpec("responses_per_record must be at least 1");
  if (eligible < workers.responses_per_record) {
    throw InvalidSpec("fewer weighted workers than responses per record");
  }
  if (workers.birth_sigma < 0) throw InvalidSpec("birth_sigma must be non-negative");
  check_rate(workers.typo_rate, "typo_rate");
}

SynthSpec parse_spec_json(std::string_view json_text) {
  SynthSpec spec;
  try {
    json doc = json::parse(json_text);
    json world = doc.value("world", json::object());
    CollectionSpec base;
    read_collection(world, base);
    spec.world.iia_rate = world.value("iia_rate", spec.world.iia_rate);
    spec.world.duplicate_rate = world.value("duplicate_rate", spec.world.duplicate_rate);
    spec.world.firm_rate = world.value("firm_rate", spec.world.firm_rate);
    spec.world.deploy_rate = world.value("deploy_rate", spec.world.deploy_rate);
    int records = world.value("records_per_collection", base.records);
    json cols = world.value("collections", json(3));
    if (cols.is_number_integer()) {
      for (int i = 0; i < cols.get<int>(); ++i) {
        CollectionSpec c = base;
        c.id = fmt::format("C{:02d}", i + 1);
        c.records = records;
        spec.world.collections.push_back(c);
      }
    } else {
      for (const auto& cj : cols) {
        CollectionSpec c = base;
        c.records = records;
        c.id = fmt::format("C{:02d}", spec.world.collections.size() + 1);
        read_collection(cj, c);
        spec.world.collections.push_back(c);
      }
    }

    json workers = doc.value("workers", json::object());
    read_archetype(workers, "honest", spec.workers.honest);
    read_archetype(workers, "sloppy", spec.workers.sloppy);
    read_archetype(workers, "spammer", spec.workers.spammer);
    spec.workers.responses_per_record = workers.value("responses_per_record", spec.workers.responses_per_record);
    spec.workers.birth_sigma = workers.value("birth_sigma", spec.workers.birth_sigma);
    spec.workers.typo_rate = workers.value("typo_rate", spec.workers.typo_rate);
  } catch (const json::exception& e) {
    throw InvalidSpec(e.what());
  }
  spec.validate();
  return spec;
}

std::string spec_to_json(const SynthSpec& spec) {
  nlohmann::ordered_json doc;
  auto& world = doc["world"];
  world["iia_rate"] = spec.world.iia_rate;
  world["duplicate_rate"] = spec.world.duplicate_rate;
  world["firm_rate"] = spec.world.firm_rate;
  world["deploy_rate"] = spec.world.deploy_rate;
  world["collections"] = nlohmann::ordered_json::array();
  for (const auto& c : spec.world.collections) {
    world["collections"].push_back({{"id", c.id},
                                    {"records", c.records},
                                    {"woman_rate", c.woman_rate},
                                    {"ethnicity", distribution_json(c.ethnicity, kAllEthnicityGroups)},
                                    {"region", distribution_json(c.region, kAllRegions)},
                                    {"birth_mean", c.birth_mean},
                                    {"birth_sd", c.birth_sd}});
  }
  auto arch = [](const ArchetypeSpec& a) {
    return nlohmann::ordered_json{{"count", a.count}, {"accuracy", a.accuracy}, {"volume_weight", a.volume_weight}};
  };
  auto& w = doc["workers"];
  w["honest"] = arch(spec.workers.honest);
  w["sloppy"] = arch(spec.workers.sloppy);
  w["spammer"] = arch(spec.workers.spammer);
  w["responses_per_record"] = spec.workers.responses_per_record;
  w["birth_sigma"] = spec.workers.birth_sigma;
  w["typo_rate"] = spec.workers.typo_rate;
  return doc.dump(2) + "\n";
}

std::string_view to_token(Archetype a) {
  switch (a) {
    case Archetype::Honest: return "honest";
    case Archetype::Sloppy: return "sloppy";
    case Archetype::Spammer: return "spammer";
  }
  return "?";
}

Campaign generate(const SynthSpec& spec, std::uint64_t seed) { return assemble(spec, seed, true); }

namespace serial {
Campaign generate(const SynthSpec& spec, std::uint64_t seed) { return assemble(spec, seed, false); }
}  // namespace serial

std::string truth_to_csv(const std::vector<TruthRow>& truth) {
  std::ostringstream os;
  os << kTruthHeader << "\n";
  for (const auto& t : truth) {
    csv::write_row(os, {t.key.collection_id, t.key.entity_id, t.iia ? "yes" : "no",
                        t.gender ? std::string(to_token(*t.gender)) : "",
                        t.ethnicity ? std::string(to_token(*t.ethnicity)) : "",
                        t.region ? std::string(to_token(*t.region)) : "",
                        t.birth_year ? std::to_string(*t.birth_year) : ""});
  }
  return os.str();
}

std::vector<TruthRow> parse_truth_csv(std::string_view csv_text) {
  csv::Table table = csv::parse(csv_text);
  std::vector<TruthRow> out;
  for (std::size_t i = 0; i < table.rows.size(); ++i) {
    csv::RowView row(table, i);
    auto bad = [&](const std::string& what) {
      return MalformedRow(fmt::format("line {}: bad {}", row.line(), what));
    };
    TruthRow t;
    t.key = {row["collection_id"], row["entity_id"]};
    if (row["iia"] != "yes" && row["iia"] != "no") throw bad("iia");
    t.iia = row["iia"] == "yes";
    if (!row["gender"].empty() && !(t.gender = parse_gender(row["gender"]))) throw bad("gender");
    if (!row["ethnicity"].empty() && !(t.ethnicity = parse_ethnicity_group(row["ethnicity"]))) throw bad("ethnicity");
    if (!row["region"].empty() && !(t.region = parse_region(row["region"]))) throw bad("region");
    if (!row["birth_year"].empty()) {
      try {
        t.birth_year = std::stoi(row["birth_year"]);
      } catch (const std::logic_error&) {
        throw bad("birth_year");
      }
    }
    out.push_back(std::move(t));
  }
  return out;
}

const AttributeScore& TruthReport::get(std::string_view attribute) const {
  for (const auto& a : attributes) {
    if (a.attribute == attribute) return a;
  }
  throw InvalidInput("no score for attribute " + std::string(attribute));
}

std::optional<double> TruthReport::overall_accuracy() const {
  int inferred = 0, correct = 0;
  for (const auto& a : attributes) {
    if (a.attribute == "iia") continue;
    inferred += a.inferred;
    correct += a.correct;
  }
  if (inferred == 0) return std::nullopt;
  return static_cast<double>(correct) / inferred;
}

TruthReport score_against_truth(const std::vector<consensus::ConsensusInference>& inferences,
                                const std::vector<TruthRow>& truth, const CampaignConfig& config) {
  std::map<RecordKey, const TruthRow*> by_key;
  for (const auto& t : truth) by_key[t.key] = &t;
  std::map<RecordKey, const consensus::ConsensusInference*> inferred;
  for (const auto& inf : inferences) {
    if (!by_key.contains(inf.key)) throw KeyMismatch("no ground truth for " + inf.key.to_string());
    inferred[inf.key] = &inf;
  }

  TruthReport report;
  for (auto name : {"iia", "gender", "ethnicity", "region", "birth_decade"}) {
    AttributeScore s;
    s.attribute = name;
    report.attributes.push_back(std::move(s));
  }
  auto tally = [](AttributeScore& s, const std::string& truth_value, const std::optional<std::string>& got) {
    ++s.eligible;
    s.confusion[{truth_value, got.value_or("none")}]++;
    if (!got) return;
    ++s.inferred;
    s.correct += *got == truth_value ? 1 : 0;
  };

  for (const auto& t : truth) {
    auto it = inferred.find(t.key);
    if (it == inferred.end() || it->second->n_responses < config.min_support) continue;
    const auto& inf = *it->second;
    std::optional<std::string> verdict;
    if (inf.iia != consensus::IiaVerdict::Undetermined) verdict = inf.iia == consensus::IiaVerdict::Iia ? "yes" : "no";
    tally(report.attributes[0], t.iia ? "yes" : "no", verdict);
    if (!t.iia) continue;

    auto opt = [](const auto& v) -> std::optional<std::string> {
      if (!v) return std::nullopt;
      return std::string(to_token(*v));
    };
    if (t.gender) tally(report.attributes[1], std::string(to_token(*t.gender)), opt(inf.gender.value));
    if (t.ethnicity) {
      tally(report.attributes[2], std::string(to_token(*t.ethnicity)),
            inf.has_ethnicity() ? opt(inf.ethnicity.value) : std::nullopt);
    }
    if (t.region) tally(report.attributes[3], std::string(to_token(*t.region)), opt(inf.region.value));
    if (t.birth_year) {
      int expected = consensus::round_to_decade(Rational(*t.birth_year), config.decade_rounding);
      std::optional<std::string> got;
      if (inf.birth.decade) got = std::to_string(*inf.birth.decade);
      tally(report.attributes[4], std::to_string(expected), got);
    }
  }
  for (auto& s : report.attributes) {
    if (s.inferred > 0) s.accuracy = static_cast<double>(s.correct) / s.inferred;
    s.coverage = s.eligible > 0 ? static_cast<double>(s.inferred) / s.eligible : 0;
  }
  return report;
}

std::string truth_report_to_json(const TruthReport& report) {
  nlohmann::ordered_json doc;
  doc["overall_accuracy"] = report.overall_accuracy() ? nlohmann::ordered_json(*report.overall_accuracy())
                                                      : nlohmann::ordered_json(nullptr);
  doc["attributes"] = nlohmann::ordered_json::array();
  for (const auto& s : report.attributes) {
    nlohmann::ordered_json a;
    a["attribute"] = s.attribute;
    a["eligible"] = s.eligible;
    a["inferred"] = s.inferred;
    a["correct"] = s.correct;
    a["accuracy"] = s.accuracy ? nlohmann::ordered_json(*s.accuracy) : nlohmann::ordered_json(nullptr);
    a["coverage"] = s.coverage;
    a["confusion"] = nlohmann::ordered_json::array();
    for (const auto& [k, n] : s.confusion) a["confusion"].push_back({{"truth", k.first}, {"inferred", k.second}, {"count", n}});
    doc["attributes"].push_back(std::move(a));
  }
  return doc.dump(2) + "\n";
}

}  // namespace crowdcensus::synth
