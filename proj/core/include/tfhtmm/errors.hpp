#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace tfhtmm {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed corpus or checkpoint text.
class ParseError : public Error {
 public:
  ParseError(std::size_t line, const std::string& what)
      : Error("line " + std::to_string(line) + ": " + what), line_(line) {}
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

/// A value outside its declared domain (label >= M, slot >= L, ...).
class DomainError : public Error {
 public:
  using Error::Error;
};

/// A node graph that is not a rooted tree.
class StructureError : public Error {
 public:
  using Error::Error;
};

/// Inconsistent hyper-parameters or corpus/model mismatch.
class ConfigError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace tfhtmm
