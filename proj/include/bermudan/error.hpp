#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace bermudan {

enum class ErrorKind {
  invalid_spec,
  invalid_scenario,
  invalid_payoffs,
  invalid_generator,
  invalid_pair,
  assumption_violated,
  dispersion_violated,
  domain_error,
  numerical_failure,
  internal_error,
};

inline std::string_view to_string(ErrorKind k) {
  switch (k) {
    case ErrorKind::invalid_spec: return "invalid-spec";
    case ErrorKind::invalid_scenario: return "invalid-scenario";
    case ErrorKind::invalid_payoffs: return "invalid-payoffs";
    case ErrorKind::invalid_generator: return "invalid-generator";
    case ErrorKind::invalid_pair: return "invalid-pair";
    case ErrorKind::assumption_violated: return "assumption-violated";
    case ErrorKind::dispersion_violated: return "dispersion-violated";
    case ErrorKind::domain_error: return "domain-error";
    case ErrorKind::numerical_failure: return "numerical-failure";
    case ErrorKind::internal_error: return "internal-error";
  }
  return "unknown";
}

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& what) { throw Error(kind, what); }

inline void require(bool cond, ErrorKind kind, const std::string& what) {
  if (!cond) fail(kind, what);
}

// CLI exit code for an error kind: 2 bad input, 3 violated assumption, 4 numerics.
inline int exit_code(ErrorKind k) {
  switch (k) {
    case ErrorKind::invalid_spec:
    case ErrorKind::invalid_scenario:
      return 2;
    case ErrorKind::invalid_payoffs:
    case ErrorKind::invalid_generator:
    case ErrorKind::invalid_pair:
    case ErrorKind::assumption_violated:
    case ErrorKind::dispersion_violated:
      return 3;
    default:
      return 4;
  }
}

}  // namespace bermudan
