#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace reithom {

/// Machine-readable failure categories. The CLI maps each to a distinct exit code.
enum class ErrorCode {
  domain = 2,
  contract = 3,
  config = 4,
  range = 5,
  nonsmooth = 6,
  unbounded_conjugate = 7,
  invalid_nfunction = 8,
  data = 9,
  resolution = 10,
  io = 11,
  non_convergence = 12,
};

std::string_view to_string(ErrorCode code) noexcept;

class Error : public std::runtime_error {
public:
  Error(ErrorCode code, const std::string& what) : std::runtime_error(what), code_(code) {}
  ErrorCode code() const noexcept { return code_; }

private:
  ErrorCode code_;
};

#define REITHOM_DEFINE_ERROR(Name, Code)                                                           \
  class Name : public Error {                                                                      \
  public:                                                                                          \
    explicit Name(const std::string& what) : Error(ErrorCode::Code, what) {}                       \
  };

REITHOM_DEFINE_ERROR(DomainError, domain)
REITHOM_DEFINE_ERROR(ContractError, contract)
REITHOM_DEFINE_ERROR(ConfigError, config)
REITHOM_DEFINE_ERROR(RangeError, range)
REITHOM_DEFINE_ERROR(NonsmoothError, nonsmooth)
REITHOM_DEFINE_ERROR(UnboundedConjugateError, unbounded_conjugate)
REITHOM_DEFINE_ERROR(InvalidNFunctionError, invalid_nfunction)
REITHOM_DEFINE_ERROR(DataError, data)
REITHOM_DEFINE_ERROR(ResolutionError, resolution)
REITHOM_DEFINE_ERROR(IoError, io)
REITHOM_DEFINE_ERROR(NonConvergenceError, non_convergence)

#undef REITHOM_DEFINE_ERROR

inline std::string_view to_string(ErrorCode code) noexcept {
  switch (code) {
  case ErrorCode::domain: return "domain";
  case ErrorCode::contract: return "contract";
  case ErrorCode::config: return "config";
  case ErrorCode::range: return "range";
  case ErrorCode::nonsmooth: return "nonsmooth";
  case ErrorCode::unbounded_conjugate: return "unbounded_conjugate";
  case ErrorCode::invalid_nfunction: return "invalid_nfunction";
  case ErrorCode::data: return "data";
  case ErrorCode::resolution: return "resolution";
  case ErrorCode::io: return "io";
  case ErrorCode::non_convergence: return "non_convergence";
  }
  return "unknown";
}

} // namespace reithom
