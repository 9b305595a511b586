#pragma once

#include <stdexcept>
#include <string>

namespace spinn {

// Shape or extent disagreement between operands.
class DimensionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Mathematically undefined request (empty mean, zero reference norm, ...).
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

// API misuse: unknown node id, backward twice, bad flag.
class UsageError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

// Invalid numerical configuration, e.g. an unstable time step.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// NaN/Inf or divergence during training.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Missing, unreadable or malformed artifact on disk.
class FileError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace spinn
