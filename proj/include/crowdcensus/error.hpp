#pragma once

#include <stdexcept>
#include <string>

namespace crowdcensus {

/// Base of every error the library raises. `kind()` is a stable machine name
/// ("MalformedRow", "DuplicateKey", ...) used in diagnostics and exit reports.
class Error : public std::runtime_error {
 public:
  Error(std::string kind, const std::string& message)
      : std::runtime_error(kind + ": " + message), kind_(std::move(kind)) {}
  const std::string& kind() const { return kind_; }

 private:
  std::string kind_;
};

#define CROWDCENSUS_DEFINE_ERROR(Name)                                   \
  class Name : public Error {                                            \
   public:                                                               \
    explicit Name(const std::string& message) : Error(#Name, message) {} \
  }

CROWDCENSUS_DEFINE_ERROR(MalformedRow);
CROWDCENSUS_DEFINE_ERROR(DuplicateKey);
CROWDCENSUS_DEFINE_ERROR(MissingColumn);
CROWDCENSUS_DEFINE_ERROR(OrphanResponse);
CROWDCENSUS_DEFINE_ERROR(NoUsableResponses);
CROWDCENSUS_DEFINE_ERROR(UnknownCountry);
CROWDCENSUS_DEFINE_ERROR(UnknownRepairTarget);
CROWDCENSUS_DEFINE_ERROR(InvalidInput);
CROWDCENSUS_DEFINE_ERROR(MissingFeature);
CROWDCENSUS_DEFINE_ERROR(DimensionMismatch);
CROWDCENSUS_DEFINE_ERROR(InvalidK);
CROWDCENSUS_DEFINE_ERROR(LeafMismatch);
CROWDCENSUS_DEFINE_ERROR(InvalidSpec);
CROWDCENSUS_DEFINE_ERROR(KeyMismatch);
CROWDCENSUS_DEFINE_ERROR(StageMissing);
CROWDCENSUS_DEFINE_ERROR(ConfigError);

#undef CROWDCENSUS_DEFINE_ERROR

}  // namespace crowdcensus
