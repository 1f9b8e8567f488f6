#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace qrbf {

/// Malformed input text. Carries the 1-based line number of the offending row.
class ParseError : public std::runtime_error {
  public:
    ParseError(std::size_t line, const std::string &what)
        : std::runtime_error("line " + std::to_string(line) + ": " + what),
          line_(line) {}

    [[nodiscard]] std::size_t line() const noexcept { return line_; }

  private:
    std::size_t line_;
};

/// Well-formed input that violates a domain invariant (bad label, ragged rows).
class ValidationError : public std::invalid_argument {
  public:
    using std::invalid_argument::invalid_argument;
};

/// An iterative solver left its safe region (loss blow-up, singular system).
class DivergenceError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

} // namespace qrbf
