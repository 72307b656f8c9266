#pragma once

#include <stdexcept>
#include <string>

namespace segtk {

// Base for every error raised by the toolkit. Callers that only need to
// distinguish "bad input" from "bug" can catch this and std::logic_error.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A precondition on an argument was violated (sizes, ranges, config).
class InvalidArgument : public Error {
 public:
  using Error::Error;
};

// A continuous coordinate fell outside the sampling domain.
class OutOfDomain : public Error {
 public:
  using Error::Error;
};

// A file could not be opened, read or written.
class IoError : public Error {
 public:
  using Error::Error;
};

// Malformed serialized data. `where` names the field path or line/column.
class ParseError : public Error {
 public:
  ParseError(const std::string& where, const std::string& what)
      : Error(where.empty() ? what : where + ": " + what),
        where_(where),
        message_(what) {}

  const std::string& where() const noexcept { return where_; }
  const std::string& message() const noexcept { return message_; }

 private:
  std::string where_;
  std::string message_;
};

}  // namespace segtk
