#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "crowdcensus/ingest.hpp"
#include "crowdcensus/types.hpp"

namespace fx {

using namespace crowdcensus;

inline constexpr Confidence L = Confidence::Low;
inline constexpr Confidence M = Confidence::Medium;
inline constexpr Confidence H = Confidence::High;

inline AnnotationResponse base(int i, IiaAnswer iia = IiaAnswer::Yes, std::string coll = "C1", std::string ent = "e1") {
  AnnotationResponse r;
  r.hit_id = "H" + std::to_string(100 + i);
  r.worker_id = "W" + std::to_string(i);
  r.record = {std::move(coll), std::move(ent)};
  r.duration_secs = 60;
  r.iia = iia;
  return r;
}

inline AnnotationResponse gender(int i, GenderAnswer g, Confidence c) {
  auto r = base(i);
  r.gender = GenderResponse{g, c};
  return r;
}

inline AnnotationResponse ethnicity(int i, std::vector<Ethnicity> cats, Confidence c) {
  auto r = base(i);
  r.ethnicity = EthnicityResponse{AnswerStatus::Answered, std::move(cats), "", c};
  return r;
}

inline AnnotationResponse origin(int i, std::string country, Confidence c) {
  auto r = base(i);
  r.origin = OriginResponse{AnswerStatus::Answered, std::move(country), c};
  return r;
}

inline AnnotationResponse birth(int i, std::string raw, Confidence c) {
  auto r = base(i);
  r.birth = BirthResponse{std::move(raw), c};
  return r;
}

inline EntityRecord record(std::string coll, std::string ent, std::string name) {
  return {{std::move(coll), std::move(ent)}, std::move(name), "", "2017-06-02"};
}

inline std::string data_dir() { return CROWDCENSUS_DATA_DIR; }

// Fresh scratch directory under the build tree.
inline std::string scratch(const std::string& name) {
  auto p = std::filesystem::path(CROWDCENSUS_SCRATCH_DIR) / name;
  std::filesystem::remove_all(p);
  std::filesystem::create_directories(p);
  return p.string();
}

}  // namespace fx
