#pragma once

#include <stdexcept>
#include <string>

namespace cvent {

// Input validation failures use std::invalid_argument; physics/domain
// failures (unphysical state, negative discriminant) use std::domain_error.

/// Model parameters cannot be determined from the supplied data.
class Unidentifiable : public std::domain_error {
  public:
    explicit Unidentifiable(const std::string& what) : std::domain_error(what) {}
};

/// Iterative solver hit its iteration cap.
class NotConverged : public std::runtime_error {
  public:
    explicit NotConverged(const std::string& what) : std::runtime_error(what) {}
};

/// File could not be opened, read, or written.
class IoError : public std::runtime_error {
  public:
    explicit IoError(const std::string& what) : std::runtime_error(what) {}
};

/// Malformed input file; carries the 1-based line number when known.
class ParseError : public std::invalid_argument {
  public:
    ParseError(const std::string& what, std::size_t line)
        : std::invalid_argument(line ? "line " + std::to_string(line) + ": " + what : what),
          line_(line) {}
    std::size_t line() const { return line_; }

  private:
    std::size_t line_;
};

}  // namespace cvent
