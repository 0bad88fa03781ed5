#pragma once

#include <stdexcept>

namespace bethe {

// Base type for all domain errors thrown by this library.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct DimensionMismatchError : Error { using Error::Error; };
struct NotSymmetricError : Error { using Error::Error; };
struct NotPositiveDefiniteError : Error { using Error::Error; };
struct NotUnitDiagonalError : Error { using Error::Error; };
struct NonpositiveDiagonalError : Error { using Error::Error; };
struct NotConnectedError : Error { using Error::Error; };
struct TooLargeError : Error { using Error::Error; };
struct NoConvergenceError : Error { using Error::Error; };
struct StrategyInapplicableError : Error { using Error::Error; };
struct NonpositiveAlphaError : Error { using Error::Error; };
struct CannotSatisfyError : Error { using Error::Error; };
struct NonpositiveVarianceError : Error { using Error::Error; };
struct NonNormalizablePairError : Error { using Error::Error; };
struct InitialNonNormalizableError : Error { using Error::Error; };
struct ZeroDenominatorError : Error { using Error::Error; };
struct NonFiniteError : Error { using Error::Error; };
struct NotAFixedPointError : Error { using Error::Error; };
struct DegenerateEdgeError : Error { using Error::Error; };
struct NotStationaryError : Error { using Error::Error; };
struct AlphaOutOfRangeError : Error { using Error::Error; };
struct RegimeMismatchError : Error { using Error::Error; };
struct InvalidSpecError : Error { using Error::Error; };
struct ParseError : Error { using Error::Error; };

}  // namespace bethe
