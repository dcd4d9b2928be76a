#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace leakmeter {

// Bad input to an operation: malformed distribution, mismatched alphabets,
// out-of-range configuration values.
class InvalidArgument : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// File could not be read/written or does not parse.
class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// symmetric_capacity was asked to solve a channel whose rows are not
// permutations of each other.
class NotRowSymmetric : public InvalidArgument {
 public:
  using InvalidArgument::InvalidArgument;
};

// Structure learning finished every degree without explaining some observables.
class StructureLearningError : public std::runtime_error {
 public:
  StructureLearningError(std::string message, std::vector<std::string> unresolved)
      : std::runtime_error(std::move(message)), unresolved_(std::move(unresolved)) {}

  const std::vector<std::string>& unresolved() const noexcept { return unresolved_; }

 private:
  std::vector<std::string> unresolved_;
};

}  // namespace leakmeter
