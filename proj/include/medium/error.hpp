#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace medium {

enum class Errc {
  NonFiniteField,
  NonceMismatch,
  TimeBeforeSample,
  NegativeLag,
  InvalidGeometry,
  UnknownAnchor,
  NoAvailableLink,
  UnknownLink,
  EmptyQueue,
  ConfigInvalid,
  ParseError,
  ValidationError,
  SchemaMismatch,
  CallbackFailure,
};

std::string_view to_string(Errc code);

/// Every recoverable failure in the library is reported as an Error carrying
/// a stable code; the message adds context for humans.
class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

}  // namespace medium
