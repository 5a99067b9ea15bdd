#pragma once

#include <stdexcept>
#include <string>

namespace ambc {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Invalid configuration or argument value.
class ParameterError : public Error {
 public:
  using Error::Error;
};

class ShapeError : public Error {
 public:
  using Error::Error;
};

/// Factorization failure, singular system, or a non-finite value.
class NumericError : public Error {
 public:
  using Error::Error;
};

/// Malformed or incompatible binary file.
class FormatError : public Error {
 public:
  using Error::Error;
};

/// Operation invoked on an object in the wrong mode.
class StateError : public Error {
 public:
  using Error::Error;
};

/// A metric whose normalizer vanishes (e.g. NMSE of an all-zero truth batch).
class MetricError : public Error {
 public:
  using Error::Error;
};

/// A required input file (checkpoint, dataset) does not exist.
class MissingArtifactError : public Error {
 public:
  using Error::Error;
};

class ParseError : public Error {
 public:
  ParseError(std::string key, int line, const std::string& what)
      : Error(format(key, line, what)), key_(std::move(key)), line_(line) {}

  const std::string& key() const { return key_; }
  int line() const { return line_; }

 private:
  static std::string format(const std::string& key, int line, const std::string& what) {
    std::string msg = "config";
    if (line > 0) msg += " line " + std::to_string(line);
    if (!key.empty()) msg += " key '" + key + "'";
    return msg + ": " + what;
  }

  std::string key_;
  int line_;
};

}  // namespace ambc
