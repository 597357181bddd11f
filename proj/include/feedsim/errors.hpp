#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace feedsim {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed input file; carries the 1-based line number.
class ParseError : public Error {
 public:
  ParseError(const std::string& what, std::size_t line)
      : Error("line " + std::to_string(line) + ": " + what), line_(line) {}
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

/// Invalid or unknown configuration key; carries the dotted key path.
class ConfigError : public Error {
 public:
  ConfigError(const std::string& key, const std::string& what)
      : Error(key + ": " + what), key_(key) {}
  const std::string& key() const noexcept { return key_; }

 private:
  std::string key_;
};

/// Correlation requested where one of the variables has zero variance.
class UndefinedCorrelation : public Error {
 public:
  using Error::Error;
};

/// A run aborted mid-simulation.
class SimulationError : public Error {
 public:
  using Error::Error;
};

}  // namespace feedsim
