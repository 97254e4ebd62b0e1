#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace polytuplet {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed input file; byte_offset points into the raw file contents.
class ParseError : public Error {
 public:
  ParseError(const std::string& what, std::size_t byte_offset)
      : Error(what), byte_offset_(byte_offset) {}
  std::size_t byte_offset() const noexcept { return byte_offset_; }

 private:
  std::size_t byte_offset_;
};

// Well-formed input that violates a domain invariant (answer count, label range, ...).
class ValidationError : public Error {
 public:
  using Error::Error;
};

// Vector too close to zero to project onto the unit sphere.
class DegenerateInputError : public Error {
 public:
  using Error::Error;
};

class ShapeError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

// Non-finite loss during training.
class DivergenceError : public Error {
 public:
  using Error::Error;
};

}  // namespace polytuplet
