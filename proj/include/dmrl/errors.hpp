#pragma once

#include <stdexcept>
#include <string>

namespace dmrl {

// Raised when vector/matrix dimensions or parameter layouts disagree.
class ShapeError : public std::invalid_argument {
 public:
  explicit ShapeError(const std::string& what) : std::invalid_argument(what) {}
};

// Raised when a caller breaks an operation's precondition (empty batch,
// stepping a finished episode, env access during model-only training...).
class ContractViolation : public std::logic_error {
 public:
  explicit ContractViolation(const std::string& what) : std::logic_error(what) {}
};

// Malformed or incompatible files (checkpoints, configs).
class FormatError : public std::runtime_error {
 public:
  explicit FormatError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace dmrl
