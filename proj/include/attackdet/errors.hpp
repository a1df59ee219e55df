#pragma once

#include <stdexcept>
#include <string>

namespace attackdet {

// Every recoverable failure in the library is an Error carrying one of these
// codes; the CLI maps any Error to exit status 1.
enum class Errc {
  // thread model
  DuplicateId,
  MissingParent,
  MultipleRoots,
  NoRoot,
  CycleDetected,
  CoordNotFound,
  // formats
  ParseError,
  ValidationError,
  // taxonomy
  UnknownLabel,
  RangeViolation,
  EmptyInput,
  // model backend
  RoleInputMismatch,
  BackendUnavailable,
  Timeout,
  AuthMissing,
  MalformedReply,
  MissingField,
  InvalidRuleSet,
  // evaluation
  LengthMismatch,
  DegenerateInput,
  MissingGold,
  // dataset io
  BadRatios,
  UnknownDesignatedBlock,
  UnmappedClass,
  // configuration
  ConfigError,
};

const char* errc_name(Errc code);

class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& message)
      : std::runtime_error(std::string(errc_name(code)) + ": " + message), code_(code) {}

  Errc code() const { return code_; }

 private:
  Errc code_;
};

[[noreturn]] inline void raise(Errc code, const std::string& message) {
  throw Error(code, message);
}

// Broken invariants reported by the validate_* operations. Violations are
// data, not errors: callers decide what to do with them.
struct Violation {
  std::string rule;     // e.g. "DenseSeq", "NullConsistency"
  std::string subject;  // offending id / block id / field
  std::string detail;

  bool operator==(const Violation&) const = default;
};

}  // namespace attackdet
