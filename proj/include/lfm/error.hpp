#pragma once

#include <stdexcept>
#include <string>

namespace lfm {

/// Broad failure categories. The CLI maps these onto stable exit codes.
enum class ErrorKind {
  kInternal,
  kIo,
  kParse,
  kUnknownId,
  kColdStart,
  kConfig,
  kNumeric,
  kFormat,
};

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

/// Parse failure with the 1-based line number it occurred on.
class ParseError : public Error {
 public:
  ParseError(std::size_t line, const std::string& what)
      : Error(ErrorKind::kParse, "line " + std::to_string(line) + ": " + what),
        line_(line) {}

  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

}  // namespace lfm
