#pragma once

#include <stdexcept>
#include <string>

namespace cjme {

// Dimension or shape disagreement between two operands.
class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Bad or out-of-bounds configuration value.
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Malformed or inconsistent on-disk data (datasets, checkpoints).
class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Non-finite values, failed convergence, singular systems.
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Unseen-class data leaking into training.
class ProtocolError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

}  // namespace cjme
