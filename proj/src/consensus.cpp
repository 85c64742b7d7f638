#include "crowdcensus/consensus.hpp"

#include <algorithm>
#include <cstdio>
#include <map>
#include <sstream>

#include "json.hpp"

#include "crowdcensus/csv.hpp"
#include "crowdcensus/error.hpp"

namespace crowdcensus::consensus {
namespace {

__int128 abs128(__int128 v) { return v < 0 ? -v : v; }

std::string format_score(const Rational& r) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6f", r.to_double());
  return buf;
}

ConsensusInference infer_record_noexcept(const ingest::PoolEntry& entry, const RegionMap& regions,
                                         const CampaignConfig& config) {
  try {
    return infer_record(entry, regions, config);
  } catch (const std::exception& e) {
    ConsensusInference out;
    out.key = entry.key;
    out.n_responses = static_cast<int>(entry.responses.size());
    out.diagnostics.push_back(std::string("inference failed: ") + e.what());
    return out;
  }
}

}  // namespace

std::string_view to_token(IiaVerdict v) {
  switch (v) {
    case IiaVerdict::Iia: return "iia";
    case IiaVerdict::NonIia: return "non_iia";
    case IiaVerdict::Undetermined: return "undetermined";
  }
  return "?";
}

std::optional<IiaVerdict> parse_iia_verdict(std::string_view t) {
  for (auto v : {IiaVerdict::Iia, IiaVerdict::NonIia, IiaVerdict::Undetermined}) {
    if (to_token(v) == t) return v;
  }
  return std::nullopt;
}

std::string_view to_token(Status s) {
  switch (s) {
    case Status::Inferred: return "inferred";
    case Status::BelowThreshold: return "below_threshold";
    case Status::InsufficientSupport: return "insufficient_support";
    case Status::NoUsableResponses: return "no_usable_responses";
    case Status::Ambiguous: return "ambiguous";
    case Status::NotApplicable: return "not_applicable";
  }
  return "?";
}

IiaResult infer_iia(Responses responses, const CampaignConfig& config) {
  IiaResult out;
  out.total = static_cast<int>(responses.size());
  out.yes = static_cast<int>(std::count_if(responses.begin(), responses.end(),
                                           [](const AnnotationResponse& r) { return r.iia == IiaAnswer::Yes; }));
  if (out.total < config.min_support) {
    out.verdict = IiaVerdict::Undetermined;
  } else {
    out.verdict = 2 * out.yes > out.total ? IiaVerdict::Iia : IiaVerdict::NonIia;
  }
  for (const auto& r : responses) {
    if (out.verdict == IiaVerdict::Iia && r.iia == IiaAnswer::No) continue;
    out.retained.push_back(r);
  }
  return out;
}

Rational gender_score(Responses responses) {
  std::int64_t sum_thirds = 0;
  std::int64_t n = 0;
  for (const auto& r : responses) {
    if (!r.gender) continue;
    int sign = 0;
    if (r.gender->category == GenderAnswer::Man) sign = -1;
    else if (r.gender->category == GenderAnswer::Woman) sign = 1;
    else continue;
    sum_thirds += sign * thirds(r.gender->confidence);
    ++n;
  }
  if (n == 0) throw NoUsableResponses("no man/woman gender answers");
  return Rational(sum_thirds, 3 * n);
}

GenderInference infer_gender(Responses responses, const CampaignConfig& config) {
  GenderInference out;
  for (const auto& r : responses) {
    if (r.gender && (r.gender->category == GenderAnswer::Man || r.gender->category == GenderAnswer::Woman)) {
      ++out.support;
    }
  }
  if (out.support == 0) {
    out.status = Status::NoUsableResponses;
    return out;
  }
  out.score = gender_score(responses);
  bool strong = out.score->abs() >= config.gender_threshold;
  if (out.support < config.min_support) {
    out.status = Status::InsufficientSupport;
  } else if (!strong) {
    out.status = Status::BelowThreshold;
  } else {
    out.status = Status::Inferred;
    out.value = *out.score < Rational(0) ? Gender::Man : Gender::Woman;
  }
  return out;
}

namespace {

// Selected groups for one response: list answers only, rare categories folded.
std::array<bool, kNumEthnicityGroups> selected_groups(const EthnicityResponse& e) {
  std::array<bool, kNumEthnicityGroups> sel{};
  for (auto c : e.categories) sel[static_cast<std::size_t>(fold(c))] = true;
  return sel;
}

bool usable(const std::optional<EthnicityResponse>& e) {
  return e && e->status == AnswerStatus::Answered && !e->categories.empty();
}

}  // namespace

std::array<Rational, kNumEthnicityGroups> ethnicity_scores(Responses responses) {
  std::array<std::int64_t, kNumEthnicityGroups> sum_thirds{};
  std::int64_t n = 0;
  for (const auto& r : responses) {
    if (!usable(r.ethnicity)) continue;
    ++n;
    auto sel = selected_groups(*r.ethnicity);
    for (std::size_t g = 0; g < kNumEthnicityGroups; ++g) {
      if (sel[g]) sum_thirds[g] += thirds(r.ethnicity->confidence);
    }
  }
  if (n == 0) throw NoUsableResponses("no ethnicity list answers");
  std::array<Rational, kNumEthnicityGroups> scores;
  for (std::size_t g = 0; g < kNumEthnicityGroups; ++g) scores[g] = Rational(sum_thirds[g], 3 * n);
  return scores;
}

EthnicityInference infer_ethnicity(Responses responses, const CampaignConfig& config) {
  EthnicityInference out;
  for (const auto& r : responses) {
    if (!usable(r.ethnicity)) continue;
    ++out.support;
    auto sel = selected_groups(*r.ethnicity);
    for (std::size_t g = 0; g < kNumEthnicityGroups; ++g) out.counts[g] += sel[g] ? 1 : 0;
  }
  if (out.support == 0) {
    out.status = Status::NoUsableResponses;
    return out;
  }
  out.scores = ethnicity_scores(responses);

  std::vector<std::size_t> qualifying;
  bool strong_but_thin = false;
  for (std::size_t g = 0; g < kNumEthnicityGroups; ++g) {
    if (out.scores[g] > config.ethnicity_threshold) {
      if (out.counts[g] >= config.min_support) qualifying.push_back(g);
      else strong_but_thin = true;
    }
  }
  if (qualifying.size() == 1) {
    out.status = Status::Inferred;
    out.value = static_cast<EthnicityGroup>(qualifying.front());
  } else if (qualifying.size() > 1) {
    out.status = Status::Ambiguous;
    out.multiple_excluded = true;
  } else {
    out.status = strong_but_thin ? Status::InsufficientSupport : Status::BelowThreshold;
  }
  return out;
}

RegionInference infer_region(Responses responses, const RegionMap& regions, const CampaignConfig& config) {
  RegionInference out;
  std::array<std::int64_t, kNumRegions> sum_thirds{};
  for (const auto& r : responses) {
    if (!r.origin || r.origin->status != AnswerStatus::Answered) continue;
    auto region = regions.lookup(r.origin->country);
    if (!region) {
      out.unknown_countries.push_back(r.origin->country);
      continue;
    }
    auto idx = static_cast<std::size_t>(*region);
    ++out.support;
    ++out.counts[idx];
    sum_thirds[idx] += thirds(r.origin->confidence);
  }
  if (out.support == 0) {
    out.status = Status::NoUsableResponses;
    return out;
  }
  std::vector<std::size_t> qualifying;
  bool strong_but_thin = false;
  for (std::size_t i = 0; i < kNumRegions; ++i) {
    out.scores[i] = Rational(sum_thirds[i], 3 * static_cast<std::int64_t>(out.support));
    if (out.scores[i] >= config.region_threshold) {
      if (out.counts[i] >= config.min_support) qualifying.push_back(i);
      else strong_but_thin = true;
    }
  }
  // Only a threshold at or below one half lets two regions qualify.
  if (qualifying.size() == 1) {
    out.status = Status::Inferred;
    out.value = static_cast<Region>(qualifying.front());
  } else if (qualifying.size() > 1) {
    out.status = Status::Ambiguous;
  } else {
    out.status = strong_but_thin ? Status::InsufficientSupport : Status::BelowThreshold;
  }
  return out;
}

std::optional<int> parse_birth_year(std::string_view raw) {
  while (!raw.empty() && (raw.front() == ' ' || raw.front() == '\t')) raw.remove_prefix(1);
  while (!raw.empty() && (raw.back() == ' ' || raw.back() == '\t')) raw.remove_suffix(1);
  if (raw.size() < 3 || raw.size() > 4) return std::nullopt;
  int year = 0;
  for (char c : raw) {
    if (c < '0' || c > '9') return std::nullopt;
    year = year * 10 + (c - '0');
  }
  return year;
}

int round_to_decade(const Rational& year, DecadeRounding rounding) {
  Rational tenths = year / Rational(10);
  std::int64_t lower = tenths.floor();
  Rational remainder = tenths - Rational(lower);
  Rational half(1, 2);
  bool up = rounding == DecadeRounding::HalfDown ? remainder > half : remainder >= half;
  return static_cast<int>((up ? lower + 1 : lower) * 10);
}

BirthInference infer_birth_decade(Responses responses, const CampaignConfig& config) {
  BirthInference out;
  struct Answer {
    int year;
    int weight_thirds;
  };
  std::vector<Answer> answers;
  for (const auto& r : responses) {
    if (!r.birth) continue;
    if (auto y = parse_birth_year(r.birth->raw)) answers.push_back({*y, thirds(r.birth->confidence)});
  }
  out.parsed = static_cast<int>(answers.size());
  if (answers.empty()) {
    out.status = Status::NoUsableResponses;
    return out;
  }

  // Exact z-test: |y - mean| > z * sd  <=>  q^2 (n y - S)^2 > p^2 (n Q - S^2), z = p/q.
  __int128 n = static_cast<__int128>(answers.size());
  __int128 sum = 0, sum_sq = 0;
  for (const auto& a : answers) {
    sum += a.year;
    sum_sq += static_cast<__int128>(a.year) * a.year;
  }
  __int128 spread = n * sum_sq - sum * sum;  // n^2 * population variance
  bool can_discard = answers.size() > 2 && spread > 0;
  __int128 zp = config.z_cut.num(), zq = config.z_cut.den();
  __int128 tol_num = config.typo_tolerance_years.num(), tol_den = config.typo_tolerance_years.den();

  std::int64_t weighted_sum = 0;
  std::int64_t weight_total = 0;
  for (const auto& a : answers) {
    __int128 dev = n * a.year - sum;  // n * (y - mean)
    bool outlier = can_discard && zq * zq * dev * dev > zp * zp * spread;
    bool typo = tol_den * abs128(dev) <= tol_num * n;  // |y - mean| <= tolerance
    if (outlier && !typo) {
      out.discarded.push_back(a.year);
      continue;
    }
    ++out.support;
    weighted_sum += static_cast<std::int64_t>(a.weight_thirds) * a.year;
    weight_total += a.weight_thirds;
  }
  if (out.support == 0) {
    out.status = Status::NoUsableResponses;
    return out;
  }
  out.weighted_mean = Rational(weighted_sum, weight_total);
  if (out.support < config.min_support) {
    out.status = Status::InsufficientSupport;
    return out;
  }
  out.decade = round_to_decade(*out.weighted_mean, config.decade_rounding);
  out.status = Status::Inferred;
  return out;
}

ConsensusInference infer_record(const ingest::PoolEntry& entry, const RegionMap& regions,
                                const CampaignConfig& config) {
  ConsensusInference out;
  out.key = entry.key;
  out.n_responses = static_cast<int>(entry.responses.size());
  IiaResult iia = infer_iia(entry.responses, config);
  out.iia = iia.verdict;
  out.iia_yes = iia.yes;
  if (iia.verdict != IiaVerdict::Iia) return out;

  out.gender = infer_gender(iia.retained, config);
  out.ethnicity = infer_ethnicity(iia.retained, config);
  out.region = infer_region(iia.retained, regions, config);
  out.birth = infer_birth_decade(iia.retained, config);
  for (const auto& c : out.region.unknown_countries) out.diagnostics.push_back("UnknownCountry: " + c);
  return out;
}

std::vector<ConsensusInference> run_consensus(const ingest::ResponsePool& pool, const RegionMap& regions,
                                              const CampaignConfig& config) {
  config.validate();
  std::vector<ConsensusInference> out(pool.entries.size());
  const std::ptrdiff_t n = static_cast<std::ptrdiff_t>(pool.entries.size());
  #pragma omp parallel for schedule(dynamic, 128)
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    out[i] = infer_record_noexcept(pool.entries[i], regions, config);
  }
  return out;
}

namespace serial {

std::vector<ConsensusInference> run_consensus(const ingest::ResponsePool& pool, const RegionMap& regions,
                                              const CampaignConfig& config) {
  config.validate();
  std::vector<ConsensusInference> out;
  out.reserve(pool.entries.size());
  for (const auto& entry : pool.entries) out.push_back(infer_record_noexcept(entry, regions, config));
  return out;
}

}  // namespace serial

std::vector<CollectionTally> tally_collections(const ingest::ResponsePool& deployed,
                                               const std::vector<ConsensusInference>& inferences) {
  std::map<std::string, CollectionTally> by_collection;
  for (const auto& e : deployed.entries) {
    auto& t = by_collection[e.key.collection_id];
    t.collection_id = e.key.collection_id;
    if (!e.responses.empty()) ++t.sampled;
  }
  for (const auto& inf : inferences) {
    auto& t = by_collection[inf.key.collection_id];
    t.collection_id = inf.key.collection_id;
    if (inf.iia != IiaVerdict::Iia) continue;
    ++t.iia;
    t.cgi += inf.gender.value ? 1 : 0;
    t.cei += inf.has_ethnicity() ? 1 : 0;
    t.cri += inf.region.value ? 1 : 0;
    t.cbi += inf.birth.decade ? 1 : 0;
  }
  std::vector<CollectionTally> out;
  CollectionTally overall{"Overall"};
  for (auto& [id, t] : by_collection) {
    overall.sampled += t.sampled;
    overall.iia += t.iia;
    overall.cgi += t.cgi;
    overall.cei += t.cei;
    overall.cri += t.cri;
    overall.cbi += t.cbi;
    out.push_back(t);
  }
  out.push_back(overall);
  return out;
}

std::string inferences_to_csv(const std::vector<ConsensusInference>& inferences) {
  std::ostringstream os;
  os << kInferencesHeader << '\n';
  for (const auto& inf : inferences) {
    std::string ethnicity;
    if (inf.ethnicity.multiple_excluded) ethnicity = "multiple_excluded";
    else if (inf.ethnicity.value) ethnicity = to_token(*inf.ethnicity.value);
    csv::write_row(os, {
        inf.key.collection_id,
        inf.key.entity_id,
        std::string(to_token(inf.iia)),
        inf.gender.value ? std::string(to_token(*inf.gender.value)) : "",
        inf.gender.score ? format_score(*inf.gender.score) : "",
        ethnicity,
        inf.region.value ? std::string(to_token(*inf.region.value)) : "",
        inf.birth.decade ? std::to_string(*inf.birth.decade) : "",
        std::to_string(inf.gender.support),
        std::to_string(inf.ethnicity.support),
        std::to_string(inf.region.support),
        std::to_string(inf.birth.support),
    });
  }
  return os.str();
}

std::vector<ConsensusInference> parse_inferences_csv(std::string_view csv_text) {
  csv::Table table = csv::parse(csv_text);
  std::vector<ConsensusInference> out;
  auto bad = [&](std::size_t row, const std::string& why) {
    return MalformedRow("line " + std::to_string(table.line_numbers[row]) + ": " + why);
  };
  auto to_int = [&](std::size_t row, const std::string& s) {
    try {
      std::size_t used = 0;
      int v = std::stoi(s, &used);
      if (used != s.size()) throw std::invalid_argument(s);
      return v;
    } catch (const std::exception&) {
      throw bad(row, "expected integer, got '" + s + "'");
    }
  };
  for (std::size_t i = 0; i < table.rows.size(); ++i) {
    csv::RowView row(table, i);
    ConsensusInference inf;
    inf.key = {row["collection_id"], row["entity_id"]};
    auto verdict = parse_iia_verdict(row["iia"]);
    if (!verdict) throw bad(i, "bad iia verdict '" + row["iia"] + "'");
    inf.iia = *verdict;
    auto status_for = [&](bool has_value) {
      if (inf.iia != IiaVerdict::Iia) return Status::NotApplicable;
      return has_value ? Status::Inferred : Status::BelowThreshold;
    };
    if (const auto& g = row["gender"]; !g.empty()) {
      auto v = parse_gender(g);
      if (!v) throw bad(i, "bad gender '" + g + "'");
      inf.gender.value = *v;
    }
    if (const auto& s = row["gender_score"]; !s.empty()) inf.gender.score = Rational::parse(s);
    if (const auto& e = row["ethnicity"]; !e.empty()) {
      if (e == "multiple_excluded") {
        inf.ethnicity.multiple_excluded = true;
      } else {
        auto v = parse_ethnicity_group(e);
        if (!v) throw bad(i, "bad ethnicity '" + e + "'");
        inf.ethnicity.value = *v;
      }
    }
    if (const auto& r = row["region"]; !r.empty()) {
      auto v = parse_region(r);
      if (!v) throw bad(i, "bad region '" + r + "'");
      inf.region.value = *v;
    }
    if (const auto& b = row["birth_decade"]; !b.empty()) inf.birth.decade = to_int(i, b);
    inf.gender.support = to_int(i, row["n_gender"]);
    inf.ethnicity.support = to_int(i, row["n_ethnicity"]);
    inf.region.support = to_int(i, row["n_region"]);
    inf.birth.support = to_int(i, row["n_birth"]);
    inf.gender.status = status_for(inf.gender.value.has_value());
    inf.ethnicity.status = inf.ethnicity.multiple_excluded ? Status::Ambiguous : status_for(inf.ethnicity.value.has_value());
    inf.region.status = status_for(inf.region.value.has_value());
    inf.birth.status = status_for(inf.birth.decade.has_value());
    out.push_back(std::move(inf));
  }
  return out;
}

std::string tallies_to_csv(const std::vector<CollectionTally>& tallies) {
  std::ostringstream os;
  os << "collection_id,sampled,iia,iia_pct,cgi,cgi_pct,cei,cei_pct,cri,cri_pct,cbi,cbi_pct\n";
  auto pct = [](int k, int n) {
    if (n == 0) return std::string();
    char buf[16];
    std::snprintf(buf, sizeof buf, "%.1f", 100.0 * k / n);
    return std::string(buf);
  };
  for (const auto& t : tallies) {
    csv::write_row(os, {t.collection_id, std::to_string(t.sampled), std::to_string(t.iia), pct(t.iia, t.sampled),
                        std::to_string(t.cgi), pct(t.cgi, t.iia), std::to_string(t.cei), pct(t.cei, t.iia),
                        std::to_string(t.cri), pct(t.cri, t.iia), std::to_string(t.cbi), pct(t.cbi, t.iia)});
  }
  return os.str();
}

std::string diagnostics_json(const std::vector<ConsensusInference>& inferences) {
  nlohmann::ordered_json doc;
  doc["records"] = nlohmann::ordered_json::array();
  std::map<std::string, int> status_counts;
  for (const auto& inf : inferences) {
    if (inf.iia != IiaVerdict::Iia && inf.diagnostics.empty()) continue;
    nlohmann::ordered_json rec;
    rec["collection_id"] = inf.key.collection_id;
    rec["entity_id"] = inf.key.entity_id;
    rec["iia"] = to_token(inf.iia);
    rec["gender"] = to_token(inf.gender.status);
    rec["ethnicity"] = to_token(inf.ethnicity.status);
    rec["region"] = to_token(inf.region.status);
    rec["birth_decade"] = to_token(inf.birth.status);
    if (!inf.birth.discarded.empty()) rec["discarded_birth_years"] = inf.birth.discarded;
    if (!inf.diagnostics.empty()) rec["errors"] = inf.diagnostics;
    for (const auto* s : {&inf.gender.status, &inf.ethnicity.status, &inf.region.status, &inf.birth.status}) {
      ++status_counts[std::string(to_token(*s))];
    }
    doc["records"].push_back(std::move(rec));
  }
  doc["status_counts"] = status_counts;
  return doc.dump(2) + "\n";
}

}  // namespace crowdcensus::consensus
