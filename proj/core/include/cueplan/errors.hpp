#pragma once

#include <stdexcept>
#include <string>

namespace cueplan {

// Error hierarchy grouped by CLI exit code:
//   ValidationError -> 1, GenerationError -> 2, IoError -> 3, NumericError -> 4.

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ValidationError : public Error {
 public:
  using Error::Error;
};
class GenerationError : public Error {
 public:
  using Error::Error;
};
class IoError : public Error {
 public:
  using Error::Error;
};
class NumericError : public Error {
 public:
  using Error::Error;
};

struct UnknownBall : ValidationError {
  explicit UnknownBall(int id)
      : ValidationError("unknown ball id " + std::to_string(id)) {}
};
struct NonFiniteInput : ValidationError {
  using ValidationError::ValidationError;
};
struct NotInContact : ValidationError {
  using ValidationError::ValidationError;
};
struct OutOfRange : ValidationError {
  using ValidationError::ValidationError;
};
struct ShapeMismatch : ValidationError {
  using ValidationError::ValidationError;
};
struct NotScalarLoss : ValidationError {
  using ValidationError::ValidationError;
};
struct InvalidGoal : ValidationError {
  using ValidationError::ValidationError;
};
struct TooManyBalls : ValidationError {
  using ValidationError::ValidationError;
  TooManyBalls(int n, int l_max)
      : ValidationError("world has " + std::to_string(n) +
                        " balls but the model supports at most " +
                        std::to_string(l_max)) {}
};
struct SequenceTooShort : ValidationError {
  using ValidationError::ValidationError;
};
struct EmptyResults : ValidationError {
  using ValidationError::ValidationError;
};
struct CheckpointMissing : ValidationError {
  using ValidationError::ValidationError;
};

struct PlacementFailure : GenerationError {
  using GenerationError::GenerationError;
};

struct IoFailure : IoError {
  using IoError::IoError;
};

struct EventOverflow : NumericError {
  int step = -1;
  explicit EventOverflow(int step_)
      : NumericError("event overflow at step " + std::to_string(step_)),
        step(step_) {}
};
struct DivergenceDetected : NumericError {
  using NumericError::NumericError;
};

}  // namespace cueplan
