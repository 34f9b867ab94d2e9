#include "fieldgraph/error.hpp"

namespace fieldgraph {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::FileNotFound: return "FileNotFound";
    case ErrorCode::DecodeError: return "DecodeError";
    case ErrorCode::ShapeError: return "ShapeError";
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::InvalidK: return "InvalidK";
    case ErrorCode::InvalidCompactness: return "InvalidCompactness";
    case ErrorCode::OutOfBounds: return "OutOfBounds";
    case ErrorCode::BinMismatch: return "BinMismatch";
    case ErrorCode::TooManyRegions: return "TooManyRegions";
    case ErrorCode::IoError: return "IoError";
    case ErrorCode::FormatError: return "FormatError";
    case ErrorCode::InvariantError: return "InvariantError";
    case ErrorCode::AsymmetricInput: return "AsymmetricInput";
    case ErrorCode::NegativeWeight: return "NegativeWeight";
    case ErrorCode::ShapeMismatch: return "ShapeMismatch";
    case ErrorCode::EmptyMask: return "EmptyMask";
    case ErrorCode::EmptyDataset: return "EmptyDataset";
    case ErrorCode::TaskMismatch: return "TaskMismatch";
    case ErrorCode::LengthMismatch: return "LengthMismatch";
    case ErrorCode::InvalidConfig: return "InvalidConfig";
    case ErrorCode::InvalidSplit: return "InvalidSplit";
  }
  return "Unknown";
}

}  // namespace fieldgraph
