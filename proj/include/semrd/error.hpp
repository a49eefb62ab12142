#pragma once

#include <stdexcept>
#include <string>

namespace semrd {

// Base class for all library errors.
class Error : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

class DimensionMismatch : public Error {
  public:
    using Error::Error;
};

// Invalid argument values: negative capacity, all-zero tables, bad ranges.
class DomainError : public Error {
  public:
    using Error::Error;
};

class NonFinite : public Error {
  public:
    using Error::Error;
};

class InvalidKernel : public Error {
  public:
    using Error::Error;
};

class DegenerateRow : public Error {
  public:
    using Error::Error;
};

class EmptySupport : public Error {
  public:
    using Error::Error;
};

class NotPositiveDefinite : public Error {
  public:
    using Error::Error;
};

class TargetUnreachable : public Error {
  public:
    using Error::Error;
};

class Infeasible : public Error {
  public:
    using Error::Error;
};

class ConfigError : public Error {
  public:
    using Error::Error;
};

class ParseError : public Error {
  public:
    ParseError(const std::string& what, long line) : Error(what), line_(line) {}
    long line() const { return line_; }

  private:
    long line_ = -1;
};

}  // namespace semrd
