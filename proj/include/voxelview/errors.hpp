#pragma once

#include <stdexcept>
#include <string>

namespace voxelview {

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Bad arguments / degenerate inputs (CLI exit code 2).
struct InvalidParam : Error {
  using Error::Error;
};
struct DegenerateUp : InvalidParam {
  using InvalidParam::InvalidParam;
};
struct ResolutionMismatch : InvalidParam {
  using InvalidParam::InvalidParam;
};
struct EmptyHypotheses : InvalidParam {
  using InvalidParam::InvalidParam;
};
struct ConfigError : InvalidParam {
  using InvalidParam::InvalidParam;
};
struct LengthMismatch : InvalidParam {
  using InvalidParam::InvalidParam;
};
struct DegenerateCloud : InvalidParam {
  using InvalidParam::InvalidParam;
};
struct DegenerateMean : InvalidParam {
  using InvalidParam::InvalidParam;
};

// File and stream problems (CLI exit code 3).
struct IoError : Error {
  using Error::Error;
};
struct BadMagic : IoError {
  using IoError::IoError;
};
struct TruncatedFile : IoError {
  using IoError::IoError;
};
struct ValueOutOfRange : IoError {
  using IoError::IoError;
};

}  // namespace voxelview
