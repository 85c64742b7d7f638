#include "crowdcensus/types.hpp"

#include <algorithm>
#include <cctype>
#include <string>

namespace crowdcensus {
namespace {

template <typename Enum, std::size_t N>
std::optional<Enum> lookup(std::string_view token, const std::array<std::pair<std::string_view, Enum>, N>& table) {
  for (const auto& [name, value] : table) {
    if (name == token) return value;
  }
  return std::nullopt;
}

constexpr std::array<std::pair<std::string_view, IiaAnswer>, 3> kIia = {{
    {"yes", IiaAnswer::Yes}, {"no", IiaAnswer::No}, {"cannot_determine", IiaAnswer::CannotDetermine}}};

constexpr std::array<std::pair<std::string_view, GenderAnswer>, 5> kGenderAnswer = {{
    {"man", GenderAnswer::Man},
    {"woman", GenderAnswer::Woman},
    {"nonbinary", GenderAnswer::Nonbinary},
    {"unknown", GenderAnswer::Unknown},
    {"notiia", GenderAnswer::NotIia}}};

constexpr std::array<std::pair<std::string_view, Ethnicity>, 7> kEthnicity = {{
    {"asian", Ethnicity::Asian},
    {"black", Ethnicity::Black},
    {"hispanic", Ethnicity::Hispanic},
    {"white", Ethnicity::White},
    {"aian", Ethnicity::AmericanIndian},
    {"nhpi", Ethnicity::PacificIslander},
    {"mena", Ethnicity::MiddleEastern}}};

constexpr std::array<std::pair<std::string_view, EthnicityGroup>, 5> kEthnicityGroup = {{
    {"asian", EthnicityGroup::Asian},
    {"black", EthnicityGroup::Black},
    {"hispanic", EthnicityGroup::Hispanic},
    {"white", EthnicityGroup::White},
    {"other", EthnicityGroup::Other}}};

constexpr std::array<std::pair<std::string_view, Gender>, 2> kGender = {{
    {"man", Gender::Man}, {"woman", Gender::Woman}}};

constexpr std::array<std::pair<std::string_view, Region>, 7> kRegionToken = {{
    {"africa", Region::Africa},
    {"asia_pacific", Region::AsiaPacific},
    {"europe", Region::Europe},
    {"latin_america", Region::LatinAmerica},
    {"north_america", Region::NorthAmerica},
    {"west_asia", Region::WestAsia},
    {"polar", Region::Polar}}};

constexpr std::array<std::pair<std::string_view, Region>, 7> kRegionName = {{
    {"Africa", Region::Africa},
    {"Asia and the Pacific", Region::AsiaPacific},
    {"Europe", Region::Europe},
    {"Latin America and the Caribbean", Region::LatinAmerica},
    {"North America", Region::NorthAmerica},
    {"West Asia", Region::WestAsia},
    {"Polar", Region::Polar}}};

constexpr std::array<std::pair<std::string_view, Confidence>, 3> kConfidence = {{
    {"1", Confidence::Low}, {"2", Confidence::Medium}, {"3", Confidence::High}}};

template <typename Enum, std::size_t N>
std::string_view name_of(Enum v, const std::array<std::pair<std::string_view, Enum>, N>& table) {
  for (const auto& [name, value] : table) {
    if (value == v) return name;
  }
  return "?";
}

}  // namespace

std::string_view to_token(IiaAnswer v) { return name_of(v, kIia); }
std::string_view to_token(GenderAnswer v) { return name_of(v, kGenderAnswer); }
std::string_view to_token(Ethnicity v) { return name_of(v, kEthnicity); }
std::string_view to_token(EthnicityGroup v) { return name_of(v, kEthnicityGroup); }
std::string_view to_token(Gender v) { return name_of(v, kGender); }
std::string_view to_token(Region v) { return name_of(v, kRegionToken); }
std::string_view to_token(Confidence v) { return name_of(v, kConfidence); }

std::string_view display_name(Region r) { return name_of(r, kRegionName); }

std::string_view display_name(EthnicityGroup g) {
  switch (g) {
    case EthnicityGroup::Asian: return "Asian";
    case EthnicityGroup::Black: return "Black/African American";
    case EthnicityGroup::Hispanic: return "Hispanic/Latinx";
    case EthnicityGroup::White: return "White";
    case EthnicityGroup::Other: return "Other";
  }
  return "?";
}

std::optional<IiaAnswer> parse_iia_answer(std::string_view t) { return lookup(t, kIia); }
std::optional<GenderAnswer> parse_gender_answer(std::string_view t) { return lookup(t, kGenderAnswer); }
std::optional<Ethnicity> parse_ethnicity(std::string_view t) { return lookup(t, kEthnicity); }
std::optional<EthnicityGroup> parse_ethnicity_group(std::string_view t) { return lookup(t, kEthnicityGroup); }
std::optional<Gender> parse_gender(std::string_view t) { return lookup(t, kGender); }
std::optional<Confidence> parse_confidence(std::string_view t) { return lookup(t, kConfidence); }

std::optional<Region> parse_region(std::string_view text) {
  if (auto r = lookup(text, kRegionToken)) return r;
  return lookup(text, kRegionName);
}

}  // namespace crowdcensus
