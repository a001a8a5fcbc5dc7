#ifndef FOODSUB_ERROR_HPP
#define FOODSUB_ERROR_HPP

#include <cstddef>
#include <stdexcept>
#include <string>

namespace foodsub {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// Bad input data or arguments. The CLI maps these to exit code 1.
class ValidationError : public Error {
public:
  using Error::Error;
};

/// Malformed file content; carries the 1-based line (or row) number.
class ParseError : public ValidationError {
public:
  ParseError(const std::string& source, std::size_t line, const std::string& what)
      : ValidationError(source + ":" + std::to_string(line) + ": " + what), line_(line) {}

  std::size_t line() const noexcept { return line_; }

private:
  std::size_t line_;
};

/// Unreadable or unwritable files. The CLI maps these to exit code 2.
class IoError : public Error {
public:
  using Error::Error;
};

}  // namespace foodsub

#endif
