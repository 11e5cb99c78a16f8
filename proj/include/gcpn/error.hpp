#pragma once

#include <stdexcept>
#include <string>

namespace gcpn {

/// Input rejected because a dimension or length did not match.
class DimensionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// A precondition the caller was responsible for was broken.
class ContractViolation : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

/// Invalid or inconsistent configuration.
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Replay buffer holds fewer transitions than the requested batch.
class UnderfullError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A NaN/Inf showed up where finite numbers are required.
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed file content; the message carries the location.
class ParseError : public std::runtime_error {
 public:
  ParseError(const std::string& where, const std::string& what)
      : std::runtime_error(where + ": " + what) {}
};

}  // namespace gcpn
