#pragma once

#include <stdexcept>
#include <string>

namespace ftcl {

// Base for everything thrown by the library.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Configuration problems: bad key, bad value, inconsistent combination.
// The CLI maps these to exit code 2.
struct ConfigError : Error {
    using Error::Error;
};

// Input-data problems (unreadable/corrupt files, malformed CSV, ...).
// The CLI maps these to exit code 3.
struct DataError : Error {
    using Error::Error;
};

// Numeric failure during training (non-finite loss). Exit code 4.
struct NumericError : Error {
    std::size_t step = 0;
    NumericError(const std::string& msg, std::size_t at_step)
        : Error(msg), step(at_step) {}
};

// numerics
struct ZeroVectorError : Error { using Error::Error; };
struct DimensionMismatchError : Error { using Error::Error; };
struct InvalidShapeError : Error { using Error::Error; };

// encoder
struct ShapeMismatchError : Error { using Error::Error; };
struct StaleCacheError : Error { using Error::Error; };
struct InvalidMomentumError : Error { using Error::Error; };

// contrastive
struct InvalidTemperatureError : Error { using Error::Error; };
struct BatchTooLargeError : Error { using Error::Error; };
struct NotNormalizedError : Error { using Error::Error; };

// feature transformation
struct LambdaOutOfRangeError : Error { using Error::Error; };
struct InvalidPermutationError : Error { using Error::Error; };
struct SizeMismatchError : Error { using Error::Error; };

// telemetry
struct EmptyInputError : Error { using Error::Error; };
struct EmptySeriesError : Error { using Error::Error; };
struct IoError : DataError { using DataError::DataError; };
struct ParseError : DataError { using DataError::DataError; };

// data ingestion
struct BadMagicError : DataError { using DataError::DataError; };
struct CountMismatchError : DataError { using DataError::DataError; };
struct TruncatedError : DataError { using DataError::DataError; };
struct RaggedRowsError : DataError { using DataError::DataError; };
struct NonNumericError : DataError { using DataError::DataError; };
struct BadShapeError : DataError { using DataError::DataError; };

// evaluation
struct DegenerateLabelsError : DataError { using DataError::DataError; };

// checkpoints
struct CheckpointVersionMismatchError : DataError { using DataError::DataError; };

} // namespace ftcl
