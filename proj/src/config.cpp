#include "crowdcensus/config.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

#include "crowdcensus/error.hpp"

namespace crowdcensus {
namespace {

std::string trim(std::string_view s) {
  auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

Rational to_rational(std::string_view key, std::string_view value) {
  try {
    return Rational::parse(value);
  } catch (const std::exception&) {
    throw ConfigError(std::string(key) + ": expected a number, got '" + std::string(value) + "'");
  }
}

double to_double(std::string_view key, std::string_view value) {
  double out = 0;
  std::string v(value);
  auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size()) {
    throw ConfigError(std::string(key) + ": expected a number, got '" + v + "'");
  }
  return out;
}

int to_int(std::string_view key, std::string_view value) {
  int out = 0;
  auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), out);
  if (ec != std::errc() || ptr != value.data() + value.size()) {
    throw ConfigError(std::string(key) + ": expected an integer, got '" + std::string(value) + "'");
  }
  return out;
}

bool to_bool(std::string_view key, std::string_view value) {
  if (value == "true" || value == "1" || value == "yes") return true;
  if (value == "false" || value == "0" || value == "no") return false;
  throw ConfigError(std::string(key) + ": expected true/false, got '" + std::string(value) + "'");
}

std::string fmt_double(double v) {
  std::ostringstream os;
  os << v;
  return os.str();
}

}  // namespace

void CampaignConfig::validate() const {
  auto in_unit = [](const Rational& r) { return r > Rational(0) && r <= Rational(1); };
  if (!in_unit(gender_threshold)) throw ConfigError("gender_threshold must be in (0,1]");
  if (!in_unit(ethnicity_threshold)) throw ConfigError("ethnicity_threshold must be in (0,1]");
  if (!in_unit(region_threshold)) throw ConfigError("region_threshold must be in (0,1]");
  if (min_support < 1) throw ConfigError("min_support must be >= 1");
  if (z_cut <= Rational(0)) throw ConfigError("z_cut must be > 0");
  if (typo_tolerance_years < Rational(0)) throw ConfigError("typo_tolerance_years must be >= 0");
}

std::string_view to_token(FeatureSet f) {
  switch (f) {
    case FeatureSet::MissionA: return "missionA";
    case FeatureSet::MissionB: return "missionB";
    case FeatureSet::DiversityA: return "diversityA";
    case FeatureSet::DiversityB: return "diversityB";
  }
  return "?";
}

std::string_view to_token(Linkage l) { return l == Linkage::Upgma ? "upgma" : "wpgma"; }

FeatureSet parse_feature_set(std::string_view t) {
  for (auto f : {FeatureSet::MissionA, FeatureSet::MissionB, FeatureSet::DiversityA, FeatureSet::DiversityB}) {
    if (to_token(f) == t) return f;
  }
  throw ConfigError("unknown feature set '" + std::string(t) + "'");
}

Linkage parse_linkage(std::string_view t) {
  if (t == "upgma" || t == "average") return Linkage::Upgma;
  if (t == "wpgma" || t == "weighted") return Linkage::Wpgma;
  throw ConfigError("unknown linkage '" + std::string(t) + "'");
}

void PipelineConfig::set(std::string_view key, std::string_view raw) {
  std::string value = trim(raw);
  auto& c = campaign;
  if (key == "gender_threshold") c.gender_threshold = to_rational(key, value);
  else if (key == "ethnicity_threshold") c.ethnicity_threshold = to_rational(key, value);
  else if (key == "region_threshold") c.region_threshold = to_rational(key, value);
  else if (key == "min_support") c.min_support = to_int(key, value);
  else if (key == "z_cut") c.z_cut = to_rational(key, value);
  else if (key == "typo_tolerance_years") c.typo_tolerance_years = to_rational(key, value);
  else if (key == "decade_rounding") {
    if (value == "half_down") c.decade_rounding = DecadeRounding::HalfDown;
    else if (value == "half_up") c.decade_rounding = DecadeRounding::HalfUp;
    else throw ConfigError("decade_rounding must be half_down or half_up");
  }
  else if (key == "fast_cutoff_secs") screening.fast_cutoff_secs = to_double(key, value);
  else if (key == "volume_threshold") screening.volume_threshold = to_int(key, value);
  else if (key == "fast_fraction_threshold") screening.fast_fraction_threshold = to_double(key, value);
  else if (key == "agreement_threshold") screening.agreement_threshold = to_double(key, value);
  else if (key == "alpha") stats.alpha = to_double(key, value);
  else if (key == "family_size") stats.family_size = value == "auto" ? 0 : to_int(key, value);
  else if (key == "test_variance") {
    if (value == "pooled") stats.variance = TestVariance::Pooled;
    else if (value == "unpooled") stats.variance = TestVariance::Unpooled;
    else throw ConfigError("test_variance must be pooled or unpooled");
  }
  else if (key == "include_repaired") stats.include_repaired = to_bool(key, value);
  else if (key == "mission_features") cluster.mission_features = parse_feature_set(value);
  else if (key == "mission_k") cluster.mission_k = to_int(key, value);
  else if (key == "diversity_features") cluster.diversity_features = parse_feature_set(value);
  else if (key == "diversity_k") cluster.diversity_k = to_int(key, value);
  else if (key == "linkage") cluster.linkage = parse_linkage(value);
  else throw ConfigError("unknown key '" + std::string(key) + "'");
}

std::map<std::string, std::string> PipelineConfig::to_map() const {
  const auto& c = campaign;
  return {
      {"gender_threshold", c.gender_threshold.to_string()},
      {"ethnicity_threshold", c.ethnicity_threshold.to_string()},
      {"region_threshold", c.region_threshold.to_string()},
      {"min_support", std::to_string(c.min_support)},
      {"z_cut", c.z_cut.to_string()},
      {"typo_tolerance_years", c.typo_tolerance_years.to_string()},
      {"decade_rounding", c.decade_rounding == DecadeRounding::HalfDown ? "half_down" : "half_up"},
      {"fast_cutoff_secs", fmt_double(screening.fast_cutoff_secs)},
      {"volume_threshold", std::to_string(screening.volume_threshold)},
      {"fast_fraction_threshold", fmt_double(screening.fast_fraction_threshold)},
      {"agreement_threshold", fmt_double(screening.agreement_threshold)},
      {"alpha", fmt_double(stats.alpha)},
      {"family_size", stats.family_size == 0 ? "auto" : std::to_string(stats.family_size)},
      {"test_variance", stats.variance == TestVariance::Pooled ? "pooled" : "unpooled"},
      {"include_repaired", stats.include_repaired ? "true" : "false"},
      {"mission_features", std::string(to_token(cluster.mission_features))},
      {"mission_k", std::to_string(cluster.mission_k)},
      {"diversity_features", std::string(to_token(cluster.diversity_features))},
      {"diversity_k", std::to_string(cluster.diversity_k)},
      {"linkage", std::string(to_token(cluster.linkage))},
  };
}

std::string PipelineConfig::to_text() const {
  std::string out;
  for (const auto& [k, v] : to_map()) out += k + " = " + v + "\n";
  return out;
}

PipelineConfig PipelineConfig::parse(std::string_view text) {
  PipelineConfig cfg;
  std::size_t line_no = 0;
  std::size_t start = 0;
  while (start <= text.size()) {
    auto end = text.find('\n', start);
    std::string line = trim(text.substr(start, end == std::string_view::npos ? std::string_view::npos : end - start));
    ++line_no;
    if (auto hash = line.find('#'); hash != std::string::npos) line = trim(line.substr(0, hash));
    if (!line.empty()) {
      auto eq = line.find('=');
      if (eq == std::string::npos) throw ConfigError("line " + std::to_string(line_no) + ": expected key = value");
      cfg.set(trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
    }
    if (end == std::string_view::npos) break;
    start = end + 1;
  }
  cfg.campaign.validate();
  return cfg;
}

PipelineConfig PipelineConfig::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config '" + path + "'");
  std::stringstream buffer;
  buffer << in.rdbuf();
  return parse(buffer.str());
}

}  // namespace crowdcensus
