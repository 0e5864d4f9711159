#pragma once

#include <stdexcept>
#include <string>

namespace dcc {

/// Base of every error the simulator raises. `kind()` is the stable name used
/// across the CLI and the Python bridge.
class Error : public std::runtime_error {
 public:
  Error(std::string kind, const std::string& message)
      : std::runtime_error(kind + ": " + message), kind_(std::move(kind)) {}

  const std::string& kind() const noexcept { return kind_; }

 private:
  std::string kind_;
};

#define DCC_DEFINE_ERROR(Name)                                   \
  class Name : public Error {                                    \
   public:                                                       \
    explicit Name(const std::string& message) : Error(#Name, message) {} \
  }

DCC_DEFINE_ERROR(ParseError);
DCC_DEFINE_ERROR(NonUniformInterval);
DCC_DEFINE_ERROR(RangeViolation);
DCC_DEFINE_ERROR(EmptyTrace);
DCC_DEFINE_ERROR(InvalidStep);
DCC_DEFINE_ERROR(InvalidParams);
DCC_DEFINE_ERROR(DomainError);
DCC_DEFINE_ERROR(UndefinedMetric);
DCC_DEFINE_ERROR(ConfigError);
DCC_DEFINE_ERROR(TraceExhausted);
DCC_DEFINE_ERROR(EpisodeFinished);
DCC_DEFINE_ERROR(SearchSpaceTooLarge);

#undef DCC_DEFINE_ERROR

}  // namespace dcc
