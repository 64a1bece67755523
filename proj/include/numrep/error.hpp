// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace numrep {

/// Base class for every error raised by the toolkit.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class InvalidArgument : public Error {
 public:
  using Error::Error;
};

/// Input has no usable variation (zero variance, all-zero grid, collinear design).
class DegenerateInput : public Error {
 public:
  using Error::Error;
};

class InsufficientData : public Error {
 public:
  using Error::Error;
};

/// Malformed file contents. `line` is 1-based, 0 when not line oriented.
class ParseError : public Error {
 public:
  ParseError(const std::string& what, std::size_t line = 0)
      : Error(line == 0 ? what : "line " + std::to_string(line) + ": " + what), line_(line) {}

  [[nodiscard]] std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

/// Ordered (row, column) integer pairs with neither presentation order observed.
class MissingData : public Error {
 public:
  MissingData(const std::string& what, std::vector<std::pair<std::int64_t, std::int64_t>> pairs)
      : Error(what), pairs_(std::move(pairs)) {}

  [[nodiscard]] const std::vector<std::pair<std::int64_t, std::int64_t>>& pairs() const noexcept {
    return pairs_;
  }

 private:
  std::vector<std::pair<std::int64_t, std::int64_t>> pairs_;
};

class TrainingDiverged : public Error {
 public:
  TrainingDiverged(const std::string& what, std::size_t step) : Error(what), step_(step) {}

  [[nodiscard]] std::size_t step() const noexcept { return step_; }

 private:
  std::size_t step_;
};

}  // namespace numrep
