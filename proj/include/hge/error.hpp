#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace hge {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

class InvalidArgument : public Error {
 public:
  using Error::Error;
};

// Malformed input row. `row` is the 1-based line number in the source file.
class ParseError : public Error {
 public:
  ParseError(const std::string& source, std::size_t row, const std::string& what)
      : Error(source + ":" + std::to_string(row) + ": " + what), row_(row) {}

  std::size_t row() const { return row_; }

 private:
  std::size_t row_;
};

}  // namespace hge
