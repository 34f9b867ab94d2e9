#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace fieldgraph {

enum class ErrorCode {
  FileNotFound,
  DecodeError,
  ShapeError,
  DimensionMismatch,
  InvalidK,
  InvalidCompactness,
  OutOfBounds,
  BinMismatch,
  TooManyRegions,
  IoError,
  FormatError,
  InvariantError,
  AsymmetricInput,
  NegativeWeight,
  ShapeMismatch,
  EmptyMask,
  EmptyDataset,
  TaskMismatch,
  LengthMismatch,
  InvalidConfig,
  InvalidSplit,
};

std::string_view to_string(ErrorCode code);

// All library failures surface as this exception; callers switch on code().
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace fieldgraph
