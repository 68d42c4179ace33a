#pragma once

#include <stdexcept>
#include <string>

namespace recvae {

// Shape or argument misuse by the caller. Maps to CLI exit code 1.
class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Anything wrong with input data or on-disk artifacts. Maps to CLI exit code 2.
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ParseError : public DataError {
 public:
  ParseError(const std::string& what, std::size_t line)
      : DataError(what + " (line " + std::to_string(line) + ")"), line_(line) {}
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

class IoError : public DataError {
 public:
  using DataError::DataError;
};

// Corrupt or unrecognized binary container (bad magic, version, truncation).
class FormatError : public DataError {
 public:
  using DataError::DataError;
};

// Input exceeds a documented capability limit (e.g. dense inversion size).
class CapabilityError : public DataError {
 public:
  using DataError::DataError;
};

// Non-finite losses, failed factorizations and the like. CLI exit code 3.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace recvae
