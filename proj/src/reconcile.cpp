#include "crowdcensus/reconcile.hpp"

#include <algorithm>
#include <set>
#include <sstream>

#include "json.hpp"
#include <unicode/normalizer2.h>
#include <unicode/uchar.h>
#include <unicode/unistr.h>

#include "crowdcensus/csv.hpp"
#include "crowdcensus/error.hpp"

namespace crowdcensus::reconcile {
namespace {

using consensus::ConsensusInference;

const icu::Normalizer2& nfc() {
  UErrorCode status = U_ZERO_ERROR;
  const icu::Normalizer2* n = icu::Normalizer2::getNFCInstance(status);
  if (U_FAILURE(status) || n == nullptr) throw std::runtime_error("ICU NFC normalizer unavailable");
  return *n;
}

std::string lower_ascii_trim(std::string_view s) {
  auto b = s.find_first_not_of(" \t");
  if (b == std::string_view::npos) return {};
  auto e = s.find_last_not_of(" \t");
  std::string out(s.substr(b, e - b + 1));
  std::transform(out.begin(), out.end(), out.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return out;
}

std::map<RecordKey, const ConsensusInference*> index_inferences(const std::vector<ConsensusInference>& inferences) {
  std::map<RecordKey, const ConsensusInference*> idx;
  for (const auto& inf : inferences) idx[inf.key] = &inf;
  return idx;
}

}  // namespace

std::string normalize_name(std::string_view display_name) {
  UErrorCode status = U_ZERO_ERROR;
  icu::UnicodeString text = icu::UnicodeString::fromUTF8(
      icu::StringPiece(display_name.data(), static_cast<int32_t>(display_name.size())));
  const auto& norm = nfc();
  text = norm.normalize(text, status);
  text.foldCase();
  text = norm.normalize(text, status);
  if (U_FAILURE(status)) throw InvalidInput("cannot normalize name '" + std::string(display_name) + "'");

  icu::UnicodeString collapsed;
  bool pending_space = false;
  for (int32_t i = 0; i < text.length();) {
    UChar32 c = text.char32At(i);
    i += U16_LENGTH(c);
    if (u_isUWhiteSpace(c)) {
      pending_space = collapsed.length() > 0;
      continue;
    }
    if (pending_space) collapsed.append(static_cast<UChar>(' '));
    pending_space = false;
    collapsed.append(c);
  }
  std::string out;
  collapsed.toUTF8String(out);
  return out;
}

std::string_view to_token(Attribute a) {
  switch (a) {
    case Attribute::Gender: return "gender";
    case Attribute::Ethnicity: return "ethnicity";
    case Attribute::Region: return "region";
    case Attribute::BirthDecade: return "birth_decade";
  }
  return "?";
}

std::optional<Attribute> parse_attribute(std::string_view t) {
  for (auto a : kAllAttributes) {
    if (to_token(a) == t) return a;
  }
  return std::nullopt;
}

std::string_view to_token(ConsistencyStatus s) {
  switch (s) {
    case ConsistencyStatus::Consistent: return "consistent";
    case ConsistencyStatus::Conflict: return "conflict";
    case ConsistencyStatus::PartialMissing: return "partial_missing";
  }
  return "?";
}

std::optional<std::string> confident_value(const ConsensusInference& inf, Attribute a) {
  switch (a) {
    case Attribute::Gender:
      if (inf.gender.value) return std::string(to_token(*inf.gender.value));
      break;
    case Attribute::Ethnicity:
      if (inf.has_ethnicity()) return std::string(to_token(*inf.ethnicity.value));
      break;
    case Attribute::Region:
      if (inf.region.value) return std::string(to_token(*inf.region.value));
      break;
    case Attribute::BirthDecade:
      if (inf.birth.decade) return std::to_string(*inf.birth.decade);
      break;
  }
  return std::nullopt;
}

std::vector<IdentityGroup> link_duplicates(const std::vector<EntityRecord>& records,
                                           const std::vector<ConsensusInference>& inferences) {
  std::map<RecordKey, const EntityRecord*> names;
  for (const auto& r : records) names[r.key] = &r;
  std::map<std::string, std::vector<RecordKey>> by_identity;
  for (const auto& inf : inferences) {
    if (inf.iia != consensus::IiaVerdict::Iia) continue;
    auto it = names.find(inf.key);
    if (it == names.end()) continue;
    auto identity = normalize_name(it->second->display_name);
    if (!identity.empty()) by_identity[identity].push_back(inf.key);
  }
  std::vector<IdentityGroup> groups;
  for (auto& [identity, members] : by_identity) {
    if (members.size() < 2) continue;
    std::sort(members.begin(), members.end());
    groups.push_back({identity, std::move(members)});
  }
  return groups;
}

int ConsistencyReport::count(Attribute a, ConsistencyStatus s) const {
  return static_cast<int>(std::count_if(entries.begin(), entries.end(), [&](const ConsistencyEntry& e) {
    return e.attribute == a && e.status == s;
  }));
}

ConsistencyReport check_consistency(const std::vector<IdentityGroup>& groups,
                                    const std::vector<ConsensusInference>& inferences) {
  auto idx = index_inferences(inferences);
  ConsistencyReport report;
  for (const auto& g : groups) {
    for (auto attr : kAllAttributes) {
      ConsistencyEntry entry{g.identity, attr, ConsistencyStatus::Consistent, {}, {}};
      std::set<std::string> distinct;
      int missing = 0;
      for (const auto& key : g.members) {
        auto it = idx.find(key);
        std::optional<std::string> v = it == idx.end() ? std::nullopt : confident_value(*it->second, attr);
        if (v) distinct.insert(*v);
        else ++missing;
        entry.values.emplace_back(key, v);
      }
      if (distinct.size() >= 2) {
        entry.status = ConsistencyStatus::Conflict;
      } else if (distinct.size() == 1 && missing > 0) {
        entry.status = ConsistencyStatus::PartialMissing;
        for (const auto& [key, v] : entry.values) {
          if (!v) entry.proposals.push_back({key, attr, *distinct.begin(), "fill from linked records"});
        }
      }
      report.entries.push_back(std::move(entry));
    }
  }
  return report;
}

RepairResult apply_repairs(const std::vector<ConsensusInference>& inferences, const std::vector<Repair>& approved) {
  RepairResult out{inferences, {}};
  std::map<RecordKey, std::size_t> pos;
  for (std::size_t i = 0; i < out.inferences.size(); ++i) pos[out.inferences[i].key] = i;

  for (const auto& rep : approved) {
    auto it = pos.find(rep.record);
    if (it == pos.end()) throw UnknownRepairTarget("no record " + rep.record.to_string());
    auto& inf = out.inferences[it->second];
    std::string old_value = confident_value(inf, rep.attribute).value_or("");
    auto bad_value = [&] {
      return UnknownRepairTarget("invalid " + std::string(to_token(rep.attribute)) + " value '" + rep.new_value +
                                 "' for " + rep.record.to_string());
    };
    switch (rep.attribute) {
      case Attribute::Gender: {
        auto v = parse_gender(rep.new_value);
        if (!v) throw bad_value();
        inf.gender.value = *v;
        inf.gender.status = consensus::Status::Inferred;
        break;
      }
      case Attribute::Ethnicity: {
        auto v = parse_ethnicity_group(rep.new_value);
        if (!v) throw bad_value();
        inf.ethnicity.value = *v;
        inf.ethnicity.multiple_excluded = false;
        inf.ethnicity.status = consensus::Status::Inferred;
        break;
      }
      case Attribute::Region: {
        auto v = parse_region(rep.new_value);
        if (!v) throw bad_value();
        inf.region.value = *v;
        inf.region.status = consensus::Status::Inferred;
        break;
      }
      case Attribute::BirthDecade: {
        int decade = 0;
        try {
          std::size_t used = 0;
          decade = std::stoi(rep.new_value, &used);
          if (used != rep.new_value.size() || decade % 10 != 0) throw bad_value();
        } catch (const std::logic_error&) {
          throw bad_value();
        }
        inf.birth.decade = decade;
        inf.birth.status = consensus::Status::Inferred;
        break;
      }
    }
    inf.repaired_mask |= attribute_bit(rep.attribute);
    out.audit.push_back({rep.record, rep.attribute, old_value, rep.new_value, rep.reason});
  }
  return out;
}

int ReferenceComparison::cell(const std::string& reference, const std::string& outcome) const {
  auto it = cells.find({reference, outcome});
  return it == cells.end() ? 0 : it->second;
}

int ReferenceComparison::row_total(const std::string& reference) const {
  int n = 0;
  for (const auto& [k, v] : cells) n += k.first == reference ? v : 0;
  return n;
}

int ReferenceComparison::column_total(const std::string& outcome) const {
  int n = 0;
  for (const auto& [k, v] : cells) n += k.second == outcome ? v : 0;
  return n;
}

ReferenceComparison compare_reference(const std::vector<EntityRecord>& records,
                                      const std::vector<ConsensusInference>& inferences,
                                      const std::vector<ReferenceRow>& reference, Attribute attribute,
                                      const std::optional<std::string>& collection) {
  auto idx = index_inferences(inferences);
  std::map<std::string, std::vector<RecordKey>> by_name;
  std::set<std::string> keys;
  for (const auto& r : records) {
    keys.insert(r.key.to_string());
    if (collection && r.key.collection_id != *collection) continue;
    if (auto name = normalize_name(r.display_name); !name.empty()) by_name[name].push_back(r.key);
  }

  ReferenceComparison cmp;
  cmp.attribute = attribute;
  std::set<std::string> labels, outcomes;
  for (const auto& row : reference) {
    if (row.attribute != attribute) continue;
    std::string label = lower_ascii_trim(row.label);
    if (label.empty()) label = "none";

    std::vector<RecordKey> matches;
    if (keys.contains(row.name_or_key)) {
      auto colon = row.name_or_key.find(':');
      matches.push_back({row.name_or_key.substr(0, colon), row.name_or_key.substr(colon + 1)});
    } else if (auto it = by_name.find(normalize_name(row.name_or_key)); it != by_name.end()) {
      matches = it->second;
    }

    std::string outcome;
    std::set<std::string> values;
    bool sampled = false;
    for (const auto& key : matches) {
      auto it = idx.find(key);
      if (it == idx.end() || it->second->n_responses == 0) continue;
      sampled = true;
      if (auto v = confident_value(*it->second, attribute)) values.insert(*v);
    }
    if (!sampled) outcome = kNotSampledColumn;
    else if (values.empty()) outcome = kUnknownColumn;
    else if (values.size() == 1) outcome = *values.begin();
    else outcome = "conflict";

    ++cmp.cells[{label, outcome}];
    ++cmp.compared;
    labels.insert(label);
    outcomes.insert(outcome);
    if (label != "none" && outcome != kNotSampledColumn) {
      ++cmp.labeled_sampled;
      cmp.agreements += outcome == label ? 1 : 0;
    }
  }
  cmp.reference_labels.assign(labels.begin(), labels.end());
  // Confident values first, then the two bookkeeping columns.
  for (const auto& o : outcomes) {
    if (o != kUnknownColumn && o != kNotSampledColumn) cmp.outcomes.push_back(o);
  }
  cmp.outcomes.emplace_back(kUnknownColumn);
  cmp.outcomes.emplace_back(kNotSampledColumn);
  if (cmp.labeled_sampled > 0) cmp.agreement_rate = static_cast<double>(cmp.agreements) / cmp.labeled_sampled;
  return cmp;
}

std::vector<ReferenceRow> parse_reference_csv(std::string_view csv_text) {
  csv::Table table = csv::parse(csv_text);
  std::vector<ReferenceRow> out;
  for (std::size_t i = 0; i < table.rows.size(); ++i) {
    csv::RowView row(table, i);
    auto attr = parse_attribute(row["attribute"]);
    if (!attr) throw MalformedRow("line " + std::to_string(row.line()) + ": unknown attribute '" + row["attribute"] + "'");
    out.push_back({row["name_or_key"], *attr, row["label"]});
  }
  return out;
}

std::vector<Repair> parse_repairs_csv(std::string_view csv_text) {
  csv::Table table = csv::parse(csv_text);
  std::vector<Repair> out;
  for (std::size_t i = 0; i < table.rows.size(); ++i) {
    csv::RowView row(table, i);
    auto attr = parse_attribute(row["attribute"]);
    if (!attr) throw UnknownRepairTarget("line " + std::to_string(row.line()) + ": unknown attribute '" + row["attribute"] + "'");
    out.push_back({{row["collection_id"], row["entity_id"]}, *attr, row["new_value"], row["reason"]});
  }
  return out;
}

std::string repairs_to_csv(const std::vector<Repair>& repairs) {
  std::ostringstream os;
  os << "collection_id,entity_id,attribute,new_value,reason\n";
  for (const auto& r : repairs) {
    csv::write_row(os, {r.record.collection_id, r.record.entity_id, std::string(to_token(r.attribute)), r.new_value,
                        r.reason});
  }
  return os.str();
}

std::string audit_to_csv(const std::vector<AuditRow>& audit) {
  std::ostringstream os;
  os << "collection_id,entity_id,attribute,old_value,new_value,reason\n";
  for (const auto& a : audit) {
    csv::write_row(os, {a.record.collection_id, a.record.entity_id, std::string(to_token(a.attribute)), a.old_value,
                        a.new_value, a.reason});
  }
  return os.str();
}

std::vector<AuditRow> parse_audit_csv(std::string_view csv_text) {
  csv::Table table = csv::parse(csv_text);
  std::vector<AuditRow> out;
  for (std::size_t i = 0; i < table.rows.size(); ++i) {
    csv::RowView row(table, i);
    auto attr = parse_attribute(row["attribute"]);
    if (!attr) throw MalformedRow("line " + std::to_string(row.line()) + ": unknown attribute");
    out.push_back({{row["collection_id"], row["entity_id"]}, *attr, row["old_value"], row["new_value"], row["reason"]});
  }
  return out;
}

std::string report_to_json(const ConsistencyReport& report) {
  nlohmann::ordered_json doc;
  nlohmann::ordered_json summary;
  for (auto a : kAllAttributes) {
    summary[std::string(to_token(a))] = {
        {"conflict", report.count(a, ConsistencyStatus::Conflict)},
        {"partial_missing", report.count(a, ConsistencyStatus::PartialMissing)},
        {"consistent", report.count(a, ConsistencyStatus::Consistent)}};
  }
  doc["summary"] = summary;
  doc["entries"] = nlohmann::ordered_json::array();
  for (const auto& e : report.entries) {
    if (e.status == ConsistencyStatus::Consistent) continue;
    nlohmann::ordered_json j;
    j["identity"] = e.identity;
    j["attribute"] = to_token(e.attribute);
    j["status"] = to_token(e.status);
    j["values"] = nlohmann::ordered_json::array();
    for (const auto& [k, v] : e.values) {
      j["values"].push_back({{"collection_id", k.collection_id},
                             {"entity_id", k.entity_id},
                             {"value", v ? nlohmann::ordered_json(*v) : nlohmann::ordered_json(nullptr)}});
    }
    doc["entries"].push_back(std::move(j));
  }
  return doc.dump(2) + "\n";
}

std::string comparison_to_json(const ReferenceComparison& cmp) {
  nlohmann::ordered_json doc;
  doc["attribute"] = to_token(cmp.attribute);
  doc["compared"] = cmp.compared;
  doc["agreements"] = cmp.agreements;
  doc["labeled_sampled"] = cmp.labeled_sampled;
  doc["agreement_rate"] = cmp.agreement_rate ? nlohmann::ordered_json(*cmp.agreement_rate) : nlohmann::ordered_json(nullptr);
  doc["outcomes"] = cmp.outcomes;
  nlohmann::ordered_json rows = nlohmann::ordered_json::object();
  for (const auto& label : cmp.reference_labels) {
    nlohmann::ordered_json row = nlohmann::ordered_json::object();
    for (const auto& o : cmp.outcomes) row[o] = cmp.cell(label, o);
    rows[label] = row;
  }
  doc["table"] = rows;
  return doc.dump(2) + "\n";
}

std::string comparison_to_csv(const ReferenceComparison& cmp) {
  std::ostringstream os;
  std::vector<std::string> header = {"reference_label"};
  header.insert(header.end(), cmp.outcomes.begin(), cmp.outcomes.end());
  header.emplace_back("total");
  csv::write_row(os, header);
  for (const auto& label : cmp.reference_labels) {
    std::vector<std::string> row = {label};
    for (const auto& o : cmp.outcomes) row.push_back(std::to_string(cmp.cell(label, o)));
    row.push_back(std::to_string(cmp.row_total(label)));
    csv::write_row(os, row);
  }
  return os.str();
}

}  // namespace crowdcensus::reconcile
