#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "crowdcensus/consensus.hpp"
#include "crowdcensus/types.hpp"

namespace crowdcensus::reconcile {

/// NFC, trim, collapse internal whitespace, Unicode case fold. Two records
/// are the same entity iff their normalized names are byte-equal.
std::string normalize_name(std::string_view display_name);

struct IdentityGroup {
  std::string identity;             // normalized name
  std::vector<RecordKey> members;   // canonical order, size >= 2
};

/// Links IIA inferences whose records share a normalized display name.
/// Singleton identities are omitted.
std::vector<IdentityGroup> link_duplicates(const std::vector<EntityRecord>& records,
                                           const std::vector<consensus::ConsensusInference>& inferences);

enum class Attribute { Gender, Ethnicity, Region, BirthDecade };
inline constexpr std::array<Attribute, 4> kAllAttributes = {Attribute::Gender, Attribute::Ethnicity,
                                                            Attribute::Region, Attribute::BirthDecade};
std::string_view to_token(Attribute a);
std::optional<Attribute> parse_attribute(std::string_view token);
inline unsigned attribute_bit(Attribute a) { return 1u << static_cast<unsigned>(a); }

/// The confident value of one attribute as its file token, if any. A record
/// excluded for multiple ethnicities has no confident ethnicity.
std::optional<std::string> confident_value(const consensus::ConsensusInference& inf, Attribute a);

enum class ConsistencyStatus { Consistent, Conflict, PartialMissing };
std::string_view to_token(ConsistencyStatus s);

struct Repair {
  RecordKey record;
  Attribute attribute;
  std::string new_value;
  std::string reason;
};

struct ConsistencyEntry {
  std::string identity;
  Attribute attribute;
  ConsistencyStatus status;
  std::vector<std::pair<RecordKey, std::optional<std::string>>> values;
  std::vector<Repair> proposals;  // fill-missing, only for PartialMissing
};

struct ConsistencyReport {
  std::vector<ConsistencyEntry> entries;
  int count(Attribute a, ConsistencyStatus s) const;
};

/// Conflict iff two or more distinct confident values; PartialMissing iff
/// one distinct value and at least one member without a value.
ConsistencyReport check_consistency(const std::vector<IdentityGroup>& groups,
                                    const std::vector<consensus::ConsensusInference>& inferences);

struct AuditRow {
  RecordKey record;
  Attribute attribute;
  std::string old_value;
  std::string new_value;
  std::string reason;
};

struct RepairResult {
  std::vector<consensus::ConsensusInference> inferences;
  std::vector<AuditRow> audit;
};

/// Applies approved repairs only. Throws UnknownRepairTarget when a repair
/// names a missing record or an invalid value.
RepairResult apply_repairs(const std::vector<consensus::ConsensusInference>& inferences,
                           const std::vector<Repair>& approved);

struct ReferenceRow {
  std::string name_or_key;
  Attribute attribute;
  std::string label;  // empty or "none" = the reference states nothing
};

inline constexpr std::string_view kUnknownColumn = "unknown";
inline constexpr std::string_view kNotSampledColumn = "not_sampled";

/// Reference label x inferred outcome for one attribute. Outcome columns are
/// the confident values seen plus "unknown" (sampled, no confident
/// inference) and "not_sampled" (no matching record).
struct ReferenceComparison {
  Attribute attribute;
  std::vector<std::string> reference_labels;
  std::vector<std::string> outcomes;
  std::map<std::pair<std::string, std::string>, int> cells;
  int compared = 0;
  int agreements = 0;
  int labeled_sampled = 0;
  std::optional<double> agreement_rate;  // agreements / labeled_sampled

  int cell(const std::string& reference, const std::string& outcome) const;
  int row_total(const std::string& reference) const;
  int column_total(const std::string& outcome) const;
};

/// `name_or_key` is matched as "collection_id:entity_id" when such a record
/// exists, otherwise as a display name. With a collection filter, name
/// matching only looks at that collection.
ReferenceComparison compare_reference(const std::vector<EntityRecord>& records,
                                      const std::vector<consensus::ConsensusInference>& inferences,
                                      const std::vector<ReferenceRow>& reference, Attribute attribute,
                                      const std::optional<std::string>& collection = std::nullopt);

std::vector<ReferenceRow> parse_reference_csv(std::string_view csv_text);
std::vector<Repair> parse_repairs_csv(std::string_view csv_text);
std::string repairs_to_csv(const std::vector<Repair>& repairs);
std::string audit_to_csv(const std::vector<AuditRow>& audit);
std::vector<AuditRow> parse_audit_csv(std::string_view csv_text);
std::string report_to_json(const ConsistencyReport& report);
std::string comparison_to_json(const ReferenceComparison& cmp);
std::string comparison_to_csv(const ReferenceComparison& cmp);

}  // namespace crowdcensus::reconcile
