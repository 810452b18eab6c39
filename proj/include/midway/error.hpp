#pragma once

#include <stdexcept>
#include <string>

namespace midway {

enum class ErrorKind {
  Syntax,
  InvalidArgument,
  Schema,
  Data,
  Cycle,
  NotConverged,
  RankDeficient,
  Limit,
  Numeric,
};

const char* to_string(ErrorKind kind);

// All library failures are reported through this type; `kind` lets callers
// (the CLI exit-code mapping, the HTTP service status mapping) branch without
// parsing messages.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(message), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

// Parse failures carry a 1-based source position.
class SyntaxError : public Error {
 public:
  SyntaxError(const std::string& message, int line, int column)
      : Error(ErrorKind::Syntax, message + " at line " + std::to_string(line) +
                                     ", column " + std::to_string(column)),
        line_(line),
        column_(column) {}

  int line() const noexcept { return line_; }
  int column() const noexcept { return column_; }

 private:
  int line_;
  int column_;
};

}  // namespace midway
