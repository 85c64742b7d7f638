#include "crowdcensus/ingest.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "json.hpp"

#include "crowdcensus/csv.hpp"
#include "crowdcensus/error.hpp"

namespace crowdcensus::ingest {
namespace {

std::vector<std::string> split(std::string_view text, char sep) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    auto pos = text.find(sep, start);
    out.emplace_back(text.substr(start, pos - start));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

std::string trim(std::string_view s) {
  auto b = s.find_first_not_of(" \t");
  if (b == std::string_view::npos) return {};
  auto e = s.find_last_not_of(" \t");
  return std::string(s.substr(b, e - b + 1));
}

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InvalidInput("cannot open '" + path + "'");
  std::stringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

bool ends_with(std::string_view s, std::string_view suffix) {
  return s.size() >= suffix.size() && s.substr(s.size() - suffix.size()) == suffix;
}

bool valid_date(std::string_view d) {
  if (d.size() != 10 || d[4] != '-' || d[7] != '-') return false;
  for (std::size_t i : {0, 1, 2, 3, 5, 6, 8, 9}) {
    if (d[i] < '0' || d[i] > '9') return false;
  }
  int month = (d[5] - '0') * 10 + (d[6] - '0');
  int day = (d[8] - '0') * 10 + (d[9] - '0');
  return month >= 1 && month <= 12 && day >= 1 && day <= 31;
}

MalformedRow malformed(std::size_t line, const std::string& why) {
  return MalformedRow("line " + std::to_string(line) + ": " + why);
}

// A single source row, either from CSV or a JSON object, as column -> text.
using Row = std::map<std::string, std::string, std::less<>>;

std::string field(const Row& row, std::string_view name) {
  auto it = row.find(name);
  return it == row.end() ? std::string{} : it->second;
}

void require_columns(const std::vector<std::string>& header, std::string_view schema) {
  for (const auto& name : split(schema, ',')) {
    if (std::find(header.begin(), header.end(), name) == header.end()) throw MissingColumn(name);
  }
}

std::vector<std::pair<std::size_t, Row>> rows_from_csv(std::string_view text, std::string_view schema) {
  csv::Table table = csv::parse(text);
  require_columns(table.header, schema);
  std::vector<std::pair<std::size_t, Row>> rows;
  rows.reserve(table.rows.size());
  for (std::size_t i = 0; i < table.rows.size(); ++i) {
    Row row;
    for (std::size_t c = 0; c < table.header.size(); ++c) row[table.header[c]] = table.rows[i][c];
    rows.emplace_back(table.line_numbers[i], std::move(row));
  }
  return rows;
}

std::vector<std::pair<std::size_t, Row>> rows_from_json(std::string_view text, std::string_view schema) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw MalformedRow(std::string("invalid JSON: ") + e.what());
  }
  if (!doc.is_array()) throw MalformedRow("JSON input must be an array of objects");
  std::vector<std::pair<std::size_t, Row>> rows;
  auto columns = split(schema, ',');
  for (std::size_t i = 0; i < doc.size(); ++i) {
    const auto& obj = doc[i];
    if (!obj.is_object()) throw malformed(i + 1, "expected an object");
    Row row;
    for (auto it = obj.begin(); it != obj.end(); ++it) {
      const auto& v = it.value();
      if (v.is_null()) {
        row[it.key()] = "";
      } else if (v.is_string()) {
        row[it.key()] = v.get<std::string>();
      } else if (v.is_array()) {
        std::string joined;
        for (const auto& part : v) {
          if (!joined.empty()) joined += '|';
          joined += part.is_string() ? part.get<std::string>() : part.dump();
        }
        row[it.key()] = joined;
      } else {
        row[it.key()] = v.dump();
      }
    }
    rows.emplace_back(i + 1, std::move(row));
  }
  // Same column contract as CSV, checked on the first object.
  if (!rows.empty()) {
    for (const auto& c : columns) {
      if (!rows.front().second.contains(c)) throw MissingColumn(c);
    }
  }
  return rows;
}

std::vector<EntityRecord> records_from_rows(const std::vector<std::pair<std::size_t, Row>>& rows) {
  std::vector<EntityRecord> records;
  std::set<RecordKey> seen;
  for (const auto& [line, row] : rows) {
    EntityRecord rec;
    rec.key.collection_id = trim(field(row, "collection_id"));
    rec.key.entity_id = trim(field(row, "entity_id"));
    rec.display_name = field(row, "display_name");
    rec.source_url = field(row, "source_url");
    rec.scrape_date = trim(field(row, "scrape_date"));
    if (rec.key.collection_id.empty()) throw malformed(line, "empty collection_id");
    if (rec.key.entity_id.empty()) throw malformed(line, "empty entity_id");
    if (!valid_date(rec.scrape_date)) throw malformed(line, "scrape_date must be YYYY-MM-DD");
    if (!seen.insert(rec.key).second) throw DuplicateKey(rec.key.to_string());
    records.push_back(std::move(rec));
  }
  return records;
}

std::optional<Confidence> confidence_cell(const Row& row, std::string_view column, std::size_t line) {
  std::string text = trim(field(row, column));
  if (text.empty()) return std::nullopt;
  auto c = parse_confidence(text);
  if (!c) throw malformed(line, std::string(column) + " must be 1, 2 or 3");
  return c;
}

ParsedResponses responses_from_rows(const std::vector<std::pair<std::size_t, Row>>& rows) {
  ParsedResponses out;
  out.responses.reserve(rows.size());
  for (const auto& [line, row] : rows) {
    AnnotationResponse r;
    r.hit_id = trim(field(row, "hit_id"));
    r.worker_id = trim(field(row, "worker_id"));
    r.record.collection_id = trim(field(row, "collection_id"));
    r.record.entity_id = trim(field(row, "entity_id"));
    if (r.hit_id.empty() || r.worker_id.empty()) throw malformed(line, "empty hit_id or worker_id");
    if (r.record.collection_id.empty() || r.record.entity_id.empty()) throw malformed(line, "empty record key");

    std::string duration = trim(field(row, "duration_secs"));
    {
      double d = -1;
      auto [ptr, ec] = std::from_chars(duration.data(), duration.data() + duration.size(), d);
      if (ec != std::errc() || ptr != duration.data() + duration.size() || !std::isfinite(d) || d < 0) {
        throw malformed(line, "duration_secs must be a nonnegative number");
      }
      r.duration_secs = d;
    }

    auto iia = parse_iia_answer(trim(field(row, "iia")));
    if (!iia) throw malformed(line, "iia must be yes, no or cannot_determine");
    r.iia = *iia;

    auto drop_unrated = [&](std::string_view what) {
      out.warnings.push_back({line, std::string(what) + " answer has no confidence grade; treated as unanswered"});
    };

    // Gender.
    if (std::string g = trim(field(row, "gender")); !g.empty()) {
      auto cat = parse_gender_answer(g);
      if (!cat) throw malformed(line, "unknown gender token '" + g + "'");
      if (auto conf = confidence_cell(row, "gender_conf", line)) {
        r.gender = GenderResponse{*cat, *conf};
      } else {
        drop_unrated("gender");
      }
    }

    // Ethnicity: either '|'-separated list tokens, or unknown / notiia.
    std::string eth = trim(field(row, "ethnicities"));
    std::string eth_text = field(row, "ethnicity_text");
    if (!eth.empty() || !trim(eth_text).empty()) {
      EthnicityResponse er;
      er.free_text = eth_text;
      if (eth == "unknown") {
        er.status = AnswerStatus::CannotDetermine;
      } else if (eth == "notiia") {
        er.status = AnswerStatus::NotIia;
      } else if (!eth.empty()) {
        for (const auto& tok : split(eth, '|')) {
          auto e = parse_ethnicity(trim(tok));
          if (!e) throw malformed(line, "unknown ethnicity token '" + tok + "'");
          er.categories.push_back(*e);
        }
        std::sort(er.categories.begin(), er.categories.end());
        er.categories.erase(std::unique(er.categories.begin(), er.categories.end()), er.categories.end());
      }
      if (auto conf = confidence_cell(row, "ethnicity_conf", line)) {
        er.confidence = *conf;
        r.ethnicity = std::move(er);
      } else {
        drop_unrated("ethnicity");
      }
    }

    if (std::string country = trim(field(row, "country")); !country.empty()) {
      OriginResponse o;
      if (country == "unknown") {
        o.status = AnswerStatus::CannotDetermine;
      } else if (country == "notiia") {
        o.status = AnswerStatus::NotIia;
      } else {
        o.country = country;
      }
      if (auto conf = confidence_cell(row, "origin_conf", line)) {
        o.confidence = *conf;
        r.origin = std::move(o);
      } else {
        drop_unrated("origin");
      }
    }

    if (std::string birth = trim(field(row, "birth_year")); !birth.empty()) {
      if (auto conf = confidence_cell(row, "birth_conf", line)) {
        r.birth = BirthResponse{birth, *conf};
      } else {
        drop_unrated("birth year");
      }
    }

    // Marketplace qualification metadata, when exported.
    if (std::string hits = trim(field(row, "worker_prior_hits")); !hits.empty()) {
      long n = -1;
      std::from_chars(hits.data(), hits.data() + hits.size(), n);
      if (n < 1000) out.warnings.push_back({line, "worker " + r.worker_id + " below 1000 prior HITs"});
    }
    if (std::string rate = trim(field(row, "worker_approval_rate")); !rate.empty()) {
      double a = -1;
      std::from_chars(rate.data(), rate.data() + rate.size(), a);
      if (a > 1.0) a /= 100.0;
      if (a < 0.99) out.warnings.push_back({line, "worker " + r.worker_id + " below 99% approval"});
    }

    out.responses.push_back(std::move(r));
  }
  return out;
}

std::string format_duration(double d) {
  std::ostringstream os;
  os.precision(17);
  os << d;
  return os.str();
}

}  // namespace

const PoolEntry* ResponsePool::find(const RecordKey& key) const {
  auto it = std::lower_bound(entries.begin(), entries.end(), key,
                             [](const PoolEntry& e, const RecordKey& k) { return e.key < k; });
  if (it == entries.end() || it->key != key) return nullptr;
  return &*it;
}

std::size_t ResponsePool::total_responses() const {
  std::size_t n = 0;
  for (const auto& e : entries) n += e.responses.size();
  return n;
}

std::vector<EntityRecord> parse_records(std::string_view csv_text) {
  return records_from_rows(rows_from_csv(csv_text, kRecordsHeader));
}

std::vector<EntityRecord> parse_records_json(std::string_view json_text) {
  return records_from_rows(rows_from_json(json_text, kRecordsHeader));
}

std::vector<EntityRecord> read_records(const std::string& path) {
  std::string text = slurp(path);
  return ends_with(path, ".json") ? parse_records_json(text) : parse_records(text);
}

ParsedResponses parse_responses(std::string_view csv_text) {
  return responses_from_rows(rows_from_csv(csv_text, kResponsesHeader));
}

ParsedResponses parse_responses_json(std::string_view json_text) {
  return responses_from_rows(rows_from_json(json_text, kResponsesHeader));
}

ParsedResponses read_responses(const std::string& path) {
  std::string text = slurp(path);
  return ends_with(path, ".json") ? parse_responses_json(text) : parse_responses(text);
}

std::string records_to_csv(const std::vector<EntityRecord>& records) {
  std::ostringstream os;
  os << kRecordsHeader << '\n';
  for (const auto& r : records) {
    csv::write_row(os, {r.key.collection_id, r.key.entity_id, r.display_name, r.source_url, r.scrape_date});
  }
  return os.str();
}

std::vector<std::string> response_fields(const AnnotationResponse& r) {
  std::vector<std::string> f = {r.hit_id, r.worker_id, r.record.collection_id, r.record.entity_id,
                                format_duration(r.duration_secs), std::string(to_token(r.iia))};
  if (r.gender) {
    f.emplace_back(to_token(r.gender->category));
    f.emplace_back(to_token(r.gender->confidence));
  } else {
    f.insert(f.end(), 2, "");
  }
  if (r.ethnicity) {
    std::string cats;
    if (r.ethnicity->status == AnswerStatus::CannotDetermine) {
      cats = "unknown";
    } else if (r.ethnicity->status == AnswerStatus::NotIia) {
      cats = "notiia";
    } else {
      for (auto e : r.ethnicity->categories) {
        if (!cats.empty()) cats += '|';
        cats += to_token(e);
      }
    }
    f.push_back(cats);
    f.push_back(r.ethnicity->free_text);
    f.emplace_back(to_token(r.ethnicity->confidence));
  } else {
    f.insert(f.end(), 3, "");
  }
  if (r.origin) {
    switch (r.origin->status) {
      case AnswerStatus::CannotDetermine: f.emplace_back("unknown"); break;
      case AnswerStatus::NotIia: f.emplace_back("notiia"); break;
      case AnswerStatus::Answered: f.push_back(r.origin->country); break;
    }
    f.emplace_back(to_token(r.origin->confidence));
  } else {
    f.insert(f.end(), 2, "");
  }
  if (r.birth) {
    f.push_back(r.birth->raw);
    f.emplace_back(to_token(r.birth->confidence));
  } else {
    f.insert(f.end(), 2, "");
  }
  return f;
}

std::string responses_to_csv(const std::vector<AnnotationResponse>& responses) {
  std::ostringstream os;
  os << kResponsesHeader << '\n';
  for (const auto& r : responses) csv::write_row(os, response_fields(r));
  return os.str();
}

std::string pool_to_csv(const ResponsePool& pool) {
  std::ostringstream os;
  os << kResponsesHeader << '\n';
  for (const auto& e : pool.entries) {
    for (const auto& r : e.responses) csv::write_row(os, response_fields(r));
  }
  return os.str();
}

bool has_firm_marker(std::string_view name) {
  std::string lower(name);
  std::transform(lower.begin(), lower.end(), lower.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return lower.find("company") != std::string::npos || lower.find("& co") != std::string::npos ||
         lower.find("& sons") != std::string::npos;
}

FirmFilterResult prefilter_firms(const std::vector<EntityRecord>& records) {
  FirmFilterResult out;
  for (const auto& r : records) {
    (has_firm_marker(r.display_name) ? out.dropped : out.kept).push_back(r);
  }
  return out;
}

bool response_less(const AnnotationResponse& a, const AnnotationResponse& b) {
  if (a.hit_id != b.hit_id) return a.hit_id < b.hit_id;
  if (a.worker_id != b.worker_id) return a.worker_id < b.worker_id;
  // Full tie-break keeps the order total when a worker resubmits a HIT.
  return response_fields(a) < response_fields(b);
}

ResponsePool pool_responses(const std::vector<AnnotationResponse>& responses,
                            const std::vector<EntityRecord>& records) {
  ResponsePool pool;
  pool.entries.reserve(records.size());
  for (const auto& rec : records) pool.entries.push_back({rec.key, {}});
  std::sort(pool.entries.begin(), pool.entries.end(),
            [](const PoolEntry& a, const PoolEntry& b) { return a.key < b.key; });

  for (const auto& r : responses) {
    auto it = std::lower_bound(pool.entries.begin(), pool.entries.end(), r.record,
                               [](const PoolEntry& e, const RecordKey& k) { return e.key < k; });
    if (it == pool.entries.end() || it->key != r.record) throw OrphanResponse(r.record.to_string());
    it->responses.push_back(r);
  }
  #pragma omp parallel for schedule(dynamic, 64)
  for (std::size_t i = 0; i < pool.entries.size(); ++i) {
    auto& list = pool.entries[i].responses;
    std::sort(list.begin(), list.end(), response_less);
  }
  return pool;
}

}  // namespace crowdcensus::ingest
