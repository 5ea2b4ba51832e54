#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace sketchlra {

// Precondition violations (bad k, p, eps, dimension mismatch) throw
// std::invalid_argument. The types below cover the remaining failure modes.

/// Non-finite or otherwise unusable numeric input.
class invalid_input_error : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// An iterative routine hit its iteration cap.
class convergence_error : public std::runtime_error {
 public:
  convergence_error(const std::string& what, double residual)
      : std::runtime_error(what + " (residual " + std::to_string(residual) + ")"),
        residual_(residual) {}

  double residual() const { return residual_; }

 private:
  double residual_;
};

/// Malformed matrix or CSV text. `line()` is 1-based; 0 when not tied to a line.
class parse_error : public std::runtime_error {
 public:
  parse_error(const std::string& source, std::size_t line, const std::string& what)
      : std::runtime_error(source + ":" + std::to_string(line) + ": " + what), line_(line) {}

  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

/// The exact oracle refuses matrices that are too large to densify.
class size_guard_error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace sketchlra
