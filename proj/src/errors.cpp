#include "attackdet/errors.hpp"

namespace attackdet {

const char* errc_name(Errc code) {
  switch (code) {
    case Errc::DuplicateId: return "DuplicateId";
    case Errc::MissingParent: return "MissingParent";
    case Errc::MultipleRoots: return "MultipleRoots";
    case Errc::NoRoot: return "NoRoot";
    case Errc::CycleDetected: return "CycleDetected";
    case Errc::CoordNotFound: return "CoordNotFound";
    case Errc::ParseError: return "ParseError";
    case Errc::ValidationError: return "ValidationError";
    case Errc::UnknownLabel: return "UnknownLabel";
    case Errc::RangeViolation: return "RangeViolation";
    case Errc::EmptyInput: return "EmptyInput";
    case Errc::RoleInputMismatch: return "RoleInputMismatch";
    case Errc::BackendUnavailable: return "BackendUnavailable";
    case Errc::Timeout: return "Timeout";
    case Errc::AuthMissing: return "AuthMissing";
    case Errc::MalformedReply: return "MalformedReply";
    case Errc::MissingField: return "MissingField";
    case Errc::InvalidRuleSet: return "InvalidRuleSet";
    case Errc::LengthMismatch: return "LengthMismatch";
    case Errc::DegenerateInput: return "DegenerateInput";
    case Errc::MissingGold: return "MissingGold";
    case Errc::BadRatios: return "BadRatios";
    case Errc::UnknownDesignatedBlock: return "UnknownDesignatedBlock";
    case Errc::UnmappedClass: return "UnmappedClass";
    case Errc::ConfigError: return "ConfigError";
  }
  return "UnknownError";
}

}  // namespace attackdet
