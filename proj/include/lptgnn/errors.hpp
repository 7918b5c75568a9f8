#pragma once

#include <stdexcept>
#include <string>

namespace lptgnn {

// Invalid or inconsistent run configuration (unknown keys, bad ranges).
class ConfigError : public std::runtime_error {
public:
  explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

// Missing or malformed input data (dataset files, checkpoints).
class DataError : public std::runtime_error {
public:
  explicit DataError(const std::string& msg) : std::runtime_error(msg) {}
};

// Tensor shape or index contract violation.
class ShapeError : public std::logic_error {
public:
  explicit ShapeError(const std::string& msg) : std::logic_error(msg) {}
};

// Numerical failure during optimization (non-finite gradients or loss).
class TrainingError : public std::runtime_error {
public:
  explicit TrainingError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace lptgnn
