#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace cellfree {

// Configuration problems map to exit code 2, numerical ones to exit code 3.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ParseError : public ConfigError {
 public:
  ParseError(std::size_t line, const std::string& what)
      : ConfigError("line " + std::to_string(line) + ": " + what), line_(line) {}
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

class ValidationError : public ConfigError {
 public:
  using ConfigError::ConfigError;
};

class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ZeroDenominator : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

class DegenerateColumn : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

class InsufficientSamples : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace cellfree
