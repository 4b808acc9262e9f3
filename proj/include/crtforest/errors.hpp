#pragma once

#include <stdexcept>
#include <string>

namespace crt {

// Every failure the library reports derives from Error so callers (the CLI in
// particular) can map them onto a single exit status.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

#define CRT_DEFINE_ERROR(Name)          \
  class Name : public Error {           \
   public:                              \
    using Error::Error;                 \
  };

CRT_DEFINE_ERROR(InvalidTree)
CRT_DEFINE_ERROR(MalformedPath)
CRT_DEFINE_ERROR(UnknownVertex)
CRT_DEFINE_ERROR(EmptySelection)
CRT_DEFINE_ERROR(TooManyLeavesRequested)
CRT_DEFINE_ERROR(DomainError)
CRT_DEFINE_ERROR(NotTiltable)
CRT_DEFINE_ERROR(InfeasibleSize)
CRT_DEFINE_ERROR(RejectionBudgetExceeded)
CRT_DEFINE_ERROR(NotStrictBinary)
CRT_DEFINE_ERROR(DegenerateSample)
CRT_DEFINE_ERROR(InsufficientData)

#undef CRT_DEFINE_ERROR

// Parse failures carry the 1-based line and 0-based column of the offending
// character; line is 0 when the input was a single in-memory string.
class ParseError : public Error {
 public:
  ParseError(const std::string& what, std::size_t line, std::size_t column)
      : Error(format(what, line, column)), line_(line), column_(column) {}

  std::size_t line() const noexcept { return line_; }
  std::size_t column() const noexcept { return column_; }

 private:
  static std::string format(const std::string& what, std::size_t line, std::size_t column) {
    std::string out;
    if (line > 0) out += "line " + std::to_string(line) + ", ";
    out += "column " + std::to_string(column) + ": " + what;
    return out;
  }

  std::size_t line_;
  std::size_t column_;
};

}  // namespace crt
