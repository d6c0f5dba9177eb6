#include "saan/error.hpp"

namespace saan {

std::string_view to_string(Errc code) {
  switch (code) {
    case Errc::ZeroNorm: return "ZeroNorm";
    case Errc::NonFinite: return "NonFinite";
    case Errc::EmptyBatch: return "EmptyBatch";
    case Errc::DimensionMismatch: return "DimensionMismatch";
    case Errc::InvalidDimension: return "InvalidDimension";
    case Errc::TooManyClasses: return "TooManyClasses";
    case Errc::NonSquare: return "NonSquare";
    case Errc::UnassignedLabel: return "UnassignedLabel";
    case Errc::EmptyClass: return "EmptyClass";
    case Errc::UnknownClass: return "UnknownClass";
    case Errc::InvalidSigma: return "InvalidSigma";
    case Errc::InvalidConfig: return "InvalidConfig";
    case Errc::ClassBudgetExceeded: return "ClassBudgetExceeded";
    case Errc::LengthMismatch: return "LengthMismatch";
    case Errc::Format: return "Format";
    case Errc::ManifestMismatch: return "ManifestMismatch";
  }
  return "Unknown";
}

bool is_numeric(Errc code) {
  return code == Errc::ZeroNorm || code == Errc::NonFinite ||
         code == Errc::InvalidSigma;
}

Error::Error(Errc code, const std::string& what)
    : std::runtime_error(std::string(to_string(code)) + ": " + what),
      code_(code) {}

}  // namespace saan
