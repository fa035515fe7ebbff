#pragma once

#include <stdexcept>
#include <string>

namespace agct {

enum class errc {
  invalid_argument,
  alphabet_mismatch,
  insufficient_history,
  budget_exceeded,
  parse_error,
  convergence,
  data_error,
};

inline const char* errc_name(errc code) {
  switch (code) {
    case errc::invalid_argument: return "INVALID_ARGUMENT";
    case errc::alphabet_mismatch: return "ALPHABET_MISMATCH";
    case errc::insufficient_history: return "INSUFFICIENT_HISTORY";
    case errc::budget_exceeded: return "BUDGET_EXCEEDED";
    case errc::parse_error: return "PARSE_ERROR";
    case errc::convergence: return "CONVERGENCE";
    case errc::data_error: return "DATA_ERROR";
  }
  return "UNKNOWN";
}

/// Library-wide exception. Every failure carries a machine-checkable code.
class error : public std::runtime_error {
 public:
  error(errc code, const std::string& what)
      : std::runtime_error(std::string(errc_name(code)) + ": " + what), code_(code) {}

  errc code() const noexcept { return code_; }

 private:
  errc code_;
};

[[noreturn]] inline void fail(errc code, const std::string& what) { throw error(code, what); }

inline void require(bool ok, const std::string& what) {
  if (!ok) fail(errc::invalid_argument, what);
}

}  // namespace agct
