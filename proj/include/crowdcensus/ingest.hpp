#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "crowdcensus/types.hpp"

namespace crowdcensus::ingest {

inline constexpr std::string_view kRecordsHeader =
    "collection_id,entity_id,display_name,source_url,scrape_date";
inline constexpr std::string_view kResponsesHeader =
    "hit_id,worker_id,collection_id,entity_id,duration_secs,iia,gender,gender_conf,"
    "ethnicities,ethnicity_text,ethnicity_conf,country,origin_conf,birth_year,birth_conf";

/// One pooled record: every response for a key, merged across deployments.
struct PoolEntry {
  RecordKey key;
  std::vector<AnnotationResponse> responses;  // sorted by (hit_id, worker_id)
};

/// Responses grouped per record in canonical record order. Records with no
/// responses are present with an empty list.
struct ResponsePool {
  std::vector<PoolEntry> entries;

  const PoolEntry* find(const RecordKey& key) const;
  std::size_t total_responses() const;
};

/// Non-fatal issues found while reading responses (answers dropped for a
/// missing confidence grade and similar).
struct IngestWarning {
  std::size_t line;
  std::string message;
};

struct ParsedResponses {
  std::vector<AnnotationResponse> responses;
  std::vector<IngestWarning> warnings;
};

/// Records in the CSV schema above. Throws MissingColumn, MalformedRow
/// (with the line number) or DuplicateKey.
std::vector<EntityRecord> parse_records(std::string_view csv_text);
/// Same field names as the CSV header, as a JSON array of objects.
std::vector<EntityRecord> parse_records_json(std::string_view json_text);
/// Dispatches on the ".json" extension.
std::vector<EntityRecord> read_records(const std::string& path);

ParsedResponses parse_responses(std::string_view csv_text);
ParsedResponses parse_responses_json(std::string_view json_text);
ParsedResponses read_responses(const std::string& path);

std::string records_to_csv(const std::vector<EntityRecord>& records);
std::string responses_to_csv(const std::vector<AnnotationResponse>& responses);
std::string pool_to_csv(const ResponsePool& pool);
std::vector<std::string> response_fields(const AnnotationResponse& r);

struct FirmFilterResult {
  std::vector<EntityRecord> kept;
  std::vector<EntityRecord> dropped;
};

/// True when the name contains "company", "& co" or "& sons", ignoring ASCII case.
bool has_firm_marker(std::string_view display_name);
FirmFilterResult prefilter_firms(const std::vector<EntityRecord>& records);

/// Groups responses by record key. Throws OrphanResponse for a response whose
/// key is not among `records`. Result is independent of input order.
ResponsePool pool_responses(const std::vector<AnnotationResponse>& responses,
                            const std::vector<EntityRecord>& records);

/// Canonical per-record response order.
bool response_less(const AnnotationResponse& a, const AnnotationResponse& b);

}  // namespace crowdcensus::ingest
