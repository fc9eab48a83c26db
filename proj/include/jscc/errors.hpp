#pragma once

#include <stdexcept>
#include <string>

namespace jscc {

/// Base class for all library-specific failures. Argument/shape violations
/// use std::invalid_argument directly.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Malformed file header or truncated payload.
struct FormatError : Error {
    using Error::Error;
};

/// Well-formed file whose contents violate a domain invariant.
struct ValidationError : Error {
    using Error::Error;
};

/// Latency budget leaves no room for payload (T_max <= T_p).
struct InfeasibleBudgetError : Error {
    using Error::Error;
};

/// Too few samples to estimate the requested statistic.
struct InsufficientDataError : Error {
    using Error::Error;
};

/// Covariance input is not usable (zero variance or not PSD).
struct DegenerateCovarianceError : Error {
    using Error::Error;
};

/// Precoding matrix fails the unitarity check.
struct InvalidPrecoderError : Error {
    using Error::Error;
};

/// Channel delay spread exceeds the cyclic prefix.
struct DelaySpreadError : Error {
    using Error::Error;
};

/// Sample stream does not match the expected frame structure.
struct FrameError : Error {
    using Error::Error;
};

/// Metric is undefined for the given input (e.g. zero signal).
struct UndefinedMetricError : Error {
    using Error::Error;
};

/// Correlation undefined because a sequence has zero variance.
struct UndefinedCorrelationError : Error {
    using Error::Error;
};

/// Summary requested for a report with no frames.
struct EmptyReportError : Error {
    using Error::Error;
};

} // namespace jscc
