#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace gmmpower {

// Base for every error raised by the library. Callers that only care about
// "something went wrong" catch this; the CLI maps subclasses to exit codes.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class InvalidParameter : public Error {
 public:
  using Error::Error;
};

class DimensionMismatch : public Error {
 public:
  using Error::Error;
};

class SingularMatrix : public Error {
 public:
  SingularMatrix(const std::string& what, std::size_t pivot)
      : Error(what + " (failing pivot " + std::to_string(pivot) + ")"), pivot_(pivot) {}
  std::size_t pivot() const noexcept { return pivot_; }

 private:
  std::size_t pivot_;
};

class NumericFailure : public Error {
 public:
  using Error::Error;
};

class SpecificationError : public Error {
 public:
  using Error::Error;
};

class DegenerateMoments : public Error {
 public:
  using Error::Error;
};

class EstimationFailure : public Error {
 public:
  using Error::Error;
};

class IdentificationError : public Error {
 public:
  using Error::Error;
};

class InvalidHypothesis : public Error {
 public:
  using Error::Error;
};

class ProtocolError : public Error {
 public:
  using Error::Error;
};

// Malformed input file; line is 1-based, 0 when not tied to a line.
class DataFormatError : public Error {
 public:
  DataFormatError(const std::string& what, std::size_t line)
      : Error(line > 0 ? "line " + std::to_string(line) + ": " + what : what), line_(line) {}
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

}  // namespace gmmpower
