#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace saan {

enum class Errc {
  ZeroNorm,
  NonFinite,
  EmptyBatch,
  DimensionMismatch,
  InvalidDimension,
  TooManyClasses,
  NonSquare,
  UnassignedLabel,
  EmptyClass,
  UnknownClass,
  InvalidSigma,
  InvalidConfig,
  ClassBudgetExceeded,
  LengthMismatch,
  Format,
  ManifestMismatch,
};

std::string_view to_string(Errc code);

// Whether a failure is a numeric breakdown (as opposed to bad input/config).
bool is_numeric(Errc code);

class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& what);

  Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

}  // namespace saan
