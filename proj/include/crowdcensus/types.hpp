#pragma once

#include <array>
#include <compare>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "crowdcensus/rational.hpp"

namespace crowdcensus {

/// (collection_id, entity_id). Orders collections first, which is the
/// canonical record order everywhere in the pipeline.
struct RecordKey {
  std::string collection_id;
  std::string entity_id;

  auto operator<=>(const RecordKey&) const = default;
  std::string to_string() const { return collection_id + ":" + entity_id; }
};

struct EntityRecord {
  RecordKey key;
  std::string display_name;
  std::string source_url;   // empty when absent
  std::string scrape_date;  // ISO yyyy-mm-dd
};

// Worker-reported certainty. The weight of each grade is grade/3.
enum class Confidence { Low = 1, Medium = 2, High = 3 };

inline Rational weight(Confidence c) { return Rational(static_cast<int>(c), 3); }
inline int thirds(Confidence c) { return static_cast<int>(c); }

enum class IiaAnswer { Yes, No, CannotDetermine };

enum class GenderAnswer { Man, Woman, Nonbinary, Unknown, NotIia };

/// The census-derived answer list offered to workers.
enum class Ethnicity {
  Asian,
  Black,
  Hispanic,
  White,
  AmericanIndian,
  PacificIslander,
  MiddleEastern,
};
inline constexpr std::size_t kNumEthnicities = 7;

/// The analysis categories: the three rare answers fold into Other.
enum class EthnicityGroup { Asian, Black, Hispanic, White, Other };
inline constexpr std::size_t kNumEthnicityGroups = 5;

inline EthnicityGroup fold(Ethnicity e) {
  switch (e) {
    case Ethnicity::Asian: return EthnicityGroup::Asian;
    case Ethnicity::Black: return EthnicityGroup::Black;
    case Ethnicity::Hispanic: return EthnicityGroup::Hispanic;
    case Ethnicity::White: return EthnicityGroup::White;
    default: return EthnicityGroup::Other;
  }
}

/// Whether a worker gave a substantive answer to a demographic question.
enum class AnswerStatus { Answered, CannotDetermine, NotIia };

struct GenderResponse {
  GenderAnswer category;
  Confidence confidence;
  auto operator<=>(const GenderResponse&) const = default;
};

struct EthnicityResponse {
  AnswerStatus status = AnswerStatus::Answered;
  std::vector<Ethnicity> categories;  // sorted, unique
  std::string free_text;              // kept for audit, never scored
  Confidence confidence = Confidence::Low;
  auto operator<=>(const EthnicityResponse&) const = default;
};

struct OriginResponse {
  AnswerStatus status = AnswerStatus::Answered;
  std::string country;
  Confidence confidence = Confidence::Low;
  auto operator<=>(const OriginResponse&) const = default;
};

struct BirthResponse {
  std::string raw;
  Confidence confidence;
  auto operator<=>(const BirthResponse&) const = default;
};

struct AnnotationResponse {
  std::string hit_id;
  std::string worker_id;
  RecordKey record;
  double duration_secs = 0;
  IiaAnswer iia = IiaAnswer::CannotDetermine;
  std::optional<GenderResponse> gender;
  std::optional<EthnicityResponse> ethnicity;
  std::optional<OriginResponse> origin;
  std::optional<BirthResponse> birth;

  auto operator<=>(const AnnotationResponse&) const = default;
};

enum class Gender { Man, Woman };

/// The seven GEO3 regions, in the order used for score arrays.
enum class Region {
  Africa,
  AsiaPacific,
  Europe,
  LatinAmerica,
  NorthAmerica,
  WestAsia,
  Polar,
};
inline constexpr std::size_t kNumRegions = 7;

// Stable lowercase tokens used in every file format.
std::string_view to_token(IiaAnswer v);
std::string_view to_token(GenderAnswer v);
std::string_view to_token(Ethnicity v);
std::string_view to_token(EthnicityGroup v);
std::string_view to_token(Gender v);
std::string_view to_token(Region v);
std::string_view to_token(Confidence v);

/// Human-readable GEO3 region name ("Asia and the Pacific").
std::string_view display_name(Region r);
std::string_view display_name(EthnicityGroup g);

std::optional<IiaAnswer> parse_iia_answer(std::string_view token);
std::optional<GenderAnswer> parse_gender_answer(std::string_view token);
std::optional<Ethnicity> parse_ethnicity(std::string_view token);
std::optional<EthnicityGroup> parse_ethnicity_group(std::string_view token);
std::optional<Gender> parse_gender(std::string_view token);
/// Accepts tokens ("north_america") and display names ("North America").
std::optional<Region> parse_region(std::string_view text);
std::optional<Confidence> parse_confidence(std::string_view token);

inline constexpr std::array<Region, kNumRegions> kAllRegions = {
    Region::Africa,       Region::AsiaPacific, Region::Europe, Region::LatinAmerica,
    Region::NorthAmerica, Region::WestAsia,    Region::Polar};
inline constexpr std::array<EthnicityGroup, kNumEthnicityGroups> kAllEthnicityGroups = {
    EthnicityGroup::Asian, EthnicityGroup::Black, EthnicityGroup::Hispanic, EthnicityGroup::White,
    EthnicityGroup::Other};

}  // namespace crowdcensus
