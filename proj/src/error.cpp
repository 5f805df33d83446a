#include "medium/error.hpp"

namespace medium {

std::string_view to_string(Errc code) {
  switch (code) {
    case Errc::NonFiniteField:
      return "NonFiniteField";
    case Errc::NonceMismatch:
      return "NonceMismatch";
    case Errc::TimeBeforeSample:
      return "TimeBeforeSample";
    case Errc::NegativeLag:
      return "NegativeLag";
    case Errc::InvalidGeometry:
      return "InvalidGeometry";
    case Errc::UnknownAnchor:
      return "UnknownAnchor";
    case Errc::NoAvailableLink:
      return "NoAvailableLink";
    case Errc::UnknownLink:
      return "UnknownLink";
    case Errc::EmptyQueue:
      return "EmptyQueue";
    case Errc::ConfigInvalid:
      return "ConfigInvalid";
    case Errc::ParseError:
      return "ParseError";
    case Errc::ValidationError:
      return "ValidationError";
    case Errc::SchemaMismatch:
      return "SchemaMismatch";
    case Errc::CallbackFailure:
      return "CallbackFailure";
  }
  return "Unknown";
}

}  // namespace medium
