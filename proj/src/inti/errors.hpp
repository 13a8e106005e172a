#pragma once

#include <stdexcept>
#include <string>

namespace inti {

enum class ErrorKind {
  kShape,
  kConfig,
  kContract,
  kNumeric,
  kIo,
};

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}
  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

// Tensor shapes that cannot be combined.
struct ShapeError : Error {
  explicit ShapeError(const std::string& what) : Error(ErrorKind::kShape, what) {}
};

// Invalid model, stage, or experiment configuration.
struct ConfigError : Error {
  explicit ConfigError(const std::string& what) : Error(ErrorKind::kConfig, what) {}
};

// A precondition of an operation was violated at run time.
struct ContractError : Error {
  explicit ContractError(const std::string& what) : Error(ErrorKind::kContract, what) {}
};

// NaN/Inf encountered, e.g. a diverging training run.
struct NumericError : Error {
  explicit NumericError(const std::string& what) : Error(ErrorKind::kNumeric, what) {}
};

struct IoError : Error {
  explicit IoError(const std::string& what) : Error(ErrorKind::kIo, what) {}
};

}  // namespace inti
