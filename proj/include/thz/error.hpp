#pragma once

#include <stdexcept>
#include <string>

namespace thz {

/// Malformed input document (JSON/CSV syntax or missing fields).
class ParseError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

/// Well-formed input that violates a domain invariant.
class ValidationError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

/// File system failures.
class IoError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

/// Divergence, non-finite values, degenerate regressions.
class NumericalError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

}  // namespace thz
