#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace kgmn {

// Malformed input data: bad records, unknown edge types, id mismatches.
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Source text outside the supported Java subset.
class ParseError : public DataError {
 public:
  ParseError(const std::string& what, std::size_t offset, std::size_t line, std::size_t column)
      : DataError(what + " at line " + std::to_string(line) + ", column " + std::to_string(column)),
        offset_(offset),
        line_(line),
        column_(column) {}

  // Position known only as a byte offset (e.g. errors raised on a TokenSeq).
  ParseError(const std::string& what, std::size_t offset)
      : DataError(what + " at offset " + std::to_string(offset)), offset_(offset), line_(0), column_(0) {}

  std::size_t offset() const noexcept { return offset_; }
  std::size_t line() const noexcept { return line_; }
  std::size_t column() const noexcept { return column_; }

 private:
  std::size_t offset_;
  std::size_t line_;
  std::size_t column_;
};

// A graph or tree that violates one of its structural invariants.
class ConsistencyError : public DataError {
 public:
  using DataError::DataError;
};

// Training cannot continue (non-finite loss or gradient, empty corpus).
class TrainingAborted : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace kgmn
