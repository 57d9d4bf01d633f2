#pragma once

#include <stdexcept>
#include <string>

namespace simsearch {

// Raised for malformed arguments: bad k, out-of-range parameters, unknown ids.
class InvalidArgument : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class DimensionMismatch : public InvalidArgument {
 public:
  DimensionMismatch(std::size_t expected, std::size_t actual)
      : InvalidArgument("dimension mismatch: expected " + std::to_string(expected) +
                        ", got " + std::to_string(actual)) {}
};

enum class FormatErrorCode {
  kIo,
  kBadMagic,
  kBadHeader,
  kTruncated,
  kCountMismatch,
  kBadPayload,
  kBadMetadata,
};

const char* to_string(FormatErrorCode code);

// Raised when reading or writing one of the on-disk formats fails.
class FormatError : public std::runtime_error {
 public:
  FormatError(FormatErrorCode code, const std::string& detail)
      : std::runtime_error(std::string(to_string(code)) + ": " + detail), code_(code) {}

  FormatErrorCode code() const noexcept { return code_; }

 private:
  FormatErrorCode code_;
};

}  // namespace simsearch
