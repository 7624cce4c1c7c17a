#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace l2s {

// Bad user-supplied data: empty corpora, malformed files, invalid arguments.
class InputError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ParseError : public InputError {
 public:
  ParseError(std::size_t line, const std::string& what)
      : InputError("line " + std::to_string(line) + ": " + what), line_(line) {}

  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

// A caller broke an operation's precondition.
class ContractError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

// NaN/Inf where finite values are required.
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Exhaustive enumeration would exceed its configured cap.
class BudgetError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace l2s
