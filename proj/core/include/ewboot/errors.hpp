#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace ewboot {

// Base of every error raised by the library. Each subclass corresponds to one
// failure category so callers (and the CLI exit-code mapping) can dispatch on
// type rather than on message text.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Parameter outside its mathematical domain (alpha, r, probabilities, ...).
class DomainError : public Error {
 public:
  using Error::Error;
};

// Sample size or dimension too small for the requested operation.
class SizeError : public Error {
 public:
  using Error::Error;
};

// Structurally invalid input, e.g. a non-monotone survival function.
class ValidationError : public Error {
 public:
  using Error::Error;
};

class DegenerateRiskSetError : public Error {
 public:
  using Error::Error;
};

// No event carries positive weight, so the partial likelihood is constant.
class UnfittableError : public Error {
 public:
  using Error::Error;
};

class SingularMatrixError : public Error {
 public:
  SingularMatrixError(const std::string& what, double condition_number)
      : Error(what), condition_number_(condition_number) {}
  double condition_number() const noexcept { return condition_number_; }

 private:
  double condition_number_;
};

class InsufficientReplicatesError : public Error {
 public:
  using Error::Error;
};

// Too many bootstrap replicates were flagged (strict mode only).
class UnstableResamplingError : public Error {
 public:
  using Error::Error;
};

// Bootstrap spread is identically zero where a studentization needs it.
class ZeroVarianceError : public Error {
 public:
  using Error::Error;
};

// Bad configuration value. key() names the offending setting.
class ConfigError : public Error {
 public:
  ConfigError(std::string key, const std::string& what)
      : Error(key.empty() ? what : key + ": " + what), key_(std::move(key)) {}
  const std::string& key() const noexcept { return key_; }

 private:
  std::string key_;
};

// Malformed input file; line() is 1-based, 0 when unknown.
class ParseError : public Error {
 public:
  ParseError(std::size_t line, const std::string& what)
      : Error("line " + std::to_string(line) + ": " + what), line_(line) {}
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace ewboot
