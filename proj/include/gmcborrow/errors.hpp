#pragma once

#include <stdexcept>
#include <string>

namespace gmc {

// Base class for all library errors.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Bad inputs, files, or configuration. CLI exit code 2.
struct ValidationError : Error {
  using Error::Error;
};

// Numerical or sampling failure during a run. CLI exit code 3.
struct ComputeError : Error {
  using Error::Error;
};

struct DegeneratePartition final : ValidationError { using ValidationError::ValidationError; };
struct DomainError final : ValidationError { using ValidationError::ValidationError; };
struct DimensionMismatch final : ValidationError { using ValidationError::ValidationError; };
struct NonpositivePrecision final : ValidationError { using ValidationError::ValidationError; };
struct NonpositiveSigma final : ValidationError { using ValidationError::ValidationError; };
struct TauOutOfSlab final : ValidationError { using ValidationError::ValidationError; };
struct InsufficientDraws final : ValidationError { using ValidationError::ValidationError; };
struct EmptyDraws final : ValidationError { using ValidationError::ValidationError; };
struct NoEvents final : ValidationError { using ValidationError::ValidationError; };
struct OutOfHorizon final : ValidationError { using ValidationError::ValidationError; };
struct NegativeTime final : ValidationError { using ValidationError::ValidationError; };
struct MissingHierarchy final : ValidationError { using ValidationError::ValidationError; };
struct UnknownCurve final : ValidationError { using ValidationError::ValidationError; };
struct UnknownTreatment final : ValidationError { using ValidationError::ValidationError; };
struct UnknownCovariateSetting final : ValidationError { using ValidationError::ValidationError; };
struct RangeError final : ValidationError { using ValidationError::ValidationError; };
struct ConfigError final : ValidationError { using ValidationError::ValidationError; };

// Parse failures carry 1-based line and field positions.
struct ParseError final : ValidationError {
  int line;
  int field;
  ParseError(int line_, int field_, const std::string& reason)
      : ValidationError("parse error at line " + std::to_string(line_) + ", field " +
                        std::to_string(field_) + ": " + reason),
        line(line_),
        field(field_) {}
};

struct SingularOmega final : ComputeError { using ComputeError::ComputeError; };
struct NotPositiveDefinite final : ComputeError { using ComputeError::ComputeError; };
struct NonfiniteLogPosterior final : ComputeError { using ComputeError::ComputeError; };
struct NonfiniteDeviance final : ComputeError { using ComputeError::ComputeError; };
struct BoundsViolation final : ComputeError { using ComputeError::ComputeError; };
struct ModelError final : ComputeError { using ComputeError::ComputeError; };

}  // namespace gmc
