#pragma once

#include <stdexcept>
#include <string>

namespace pulselock {

/// A precondition on an argument was violated.
class InvalidInput : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// A frequency band does not fit the spectrum it is applied to.
class InvalidBand : public InvalidInput {
 public:
  using InvalidInput::InvalidInput;
};

/// A scenario configuration breaks one of its invariants. The message names
/// the offending field.
class ValidationError : public InvalidInput {
 public:
  using InvalidInput::InvalidInput;
};

class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace pulselock
