#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace trex {

enum class Errc {
  // input / data
  NegativeInput,
  DegenerateSeries,
  OutOfRange,
  CropTooShort,
  InvalidParamSet,
  SeedCollision,
  SeriesTooShort,
  SegmentTooShort,
  ZeroVector,
  WidthTooLarge,
  NoPositives,
  NoNegatives,
  // numerics
  ShapeMismatch,
  NonFiniteValue,
  NotScalar,
  TapeConsumed,
  NonFiniteLoss,
  // orchestration
  ConfigError,
  IoError,
  MissingCheckpoint,
  SampleSetMismatch,
};

std::string_view errc_name(Errc code) noexcept;

/// Single exception type for the library; `code()` says what went wrong.
class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& what)
      : std::runtime_error(std::string(errc_name(code)) + ": " + what), code_(code) {}

  Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

}  // namespace trex
