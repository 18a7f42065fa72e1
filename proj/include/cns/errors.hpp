#pragma once

#include <stdexcept>
#include <string>

namespace cns {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// mesh
class NonConforming : public Error { using Error::Error; };
class DegenerateCell : public Error { using Error::Error; };
class DuplicateCell : public Error { using Error::Error; };
class MeshFormatError : public Error { using Error::Error; };

// spaces
class QuadratureDegreeTooLow : public Error { using Error::Error; };

// thermo
class NegativeDensity : public Error { using Error::Error; };
class NonPositiveReference : public Error { using Error::Error; };
class InvalidPressureLaw : public Error { using Error::Error; };

// scheme
class BoundaryFace : public Error { using Error::Error; };
class LinearSolveFailure : public Error { using Error::Error; };
class NonlinearDivergence : public Error { using Error::Error; };
class NonPositiveInitialDensity : public Error { using Error::Error; };
class MeshQualityTooLow : public Error { using Error::Error; };

// diagnostics
class NonPositiveReferenceField : public Error { using Error::Error; };

// cli / config
class ConfigError : public Error { using Error::Error; };

}  // namespace cns
