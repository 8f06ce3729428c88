#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace mlpr {

// Root of every error raised by the library. The CLI maps IoError and
// ParseError to exit code 2 and everything else to exit code 1.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Incompatible tensor or vector shapes.
class DimensionError : public Error {
 public:
  using Error::Error;
};

// NaN/Inf produced by a forward or backward computation.
class NumericError : public Error {
 public:
  using Error::Error;
};

// Violated precondition (bad argument, bad config, bad call order).
class ContractError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

class ParseError : public Error {
 public:
  explicit ParseError(const std::string& what) : Error(what), line_(0) {}
  ParseError(std::size_t line, const std::string& what)
      : Error("line " + std::to_string(line) + ": " + what), line_(line) {}

  // 1-based line of the offending input; 0 for non-line-oriented formats.
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

class MissingEmbeddingError : public Error {
 public:
  explicit MissingEmbeddingError(std::string id)
      : Error("no embedding for id '" + id + "'"), id_(std::move(id)) {}

  const std::string& id() const { return id_; }

 private:
  std::string id_;
};

// A metric that is mathematically undefined for its input (e.g. AUC with a
// single class present).
class UndefinedMetricError : public Error {
 public:
  using Error::Error;
};

}  // namespace mlpr
