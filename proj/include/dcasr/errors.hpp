#ifndef DCASR_ERRORS_HPP
#define DCASR_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace dcasr {

/// Input data violates a documented invariant (bad catalog, malformed split, ...).
class ValidationError : public std::runtime_error {
 public:
  explicit ValidationError(const std::string& msg) : std::runtime_error(msg) {}
};

/// A caller broke an operation's precondition (shape mismatch, bad range, ...).
class ContractError : public std::runtime_error {
 public:
  explicit ContractError(const std::string& msg) : std::runtime_error(msg) {}
};

/// Input file does not match the declared schema.
class SchemaError : public std::runtime_error {
 public:
  explicit SchemaError(const std::string& msg) : std::runtime_error(msg) {}
};

/// A non-finite value surfaced where finite math was required.
class NumericError : public std::runtime_error {
 public:
  explicit NumericError(const std::string& msg) : std::runtime_error(msg) {}
};

/// Filesystem / serialization failure.
class IoError : public std::runtime_error {
 public:
  explicit IoError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace dcasr

#endif  // DCASR_ERRORS_HPP
