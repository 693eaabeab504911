#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace supercam {

/// Invalid configuration or argument (sensor parameters, budgets, sizes).
class ConfigError : public std::invalid_argument {
public:
  using std::invalid_argument::invalid_argument;
};

/// Input that is well-formed but cannot be processed (e.g. an all-zero image
/// when calibrating exposure).
class DegenerateInputError : public std::domain_error {
public:
  using std::domain_error::domain_error;
};

/// Memory budget too small for the requested pipeline.
class BudgetError : public std::invalid_argument {
public:
  using std::invalid_argument::invalid_argument;
};

/// Malformed or truncated file. Carries the byte offset where parsing failed.
class FormatError : public std::runtime_error {
public:
  FormatError(const std::string& what, std::size_t offset)
      : std::runtime_error(what + " (at byte offset " + std::to_string(offset) + ")"),
        offset_(offset) {}

  std::size_t offset() const noexcept { return offset_; }

private:
  std::size_t offset_;
};

}  // namespace supercam
