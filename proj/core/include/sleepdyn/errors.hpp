#pragma once

#include <stdexcept>
#include <string>

namespace sleepdyn {

// Base of every library error. The three direct children map onto the CLI
// exit codes: ConfigError -> 2, DataError -> 3, NumericError -> 4.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

class DataError : public Error {
 public:
  using Error::Error;
};

class NumericError : public Error {
 public:
  using Error::Error;
};

// --- EDF ingestion ---
class MalformedHeader : public DataError { public: using DataError::DataError; };
class TruncatedData : public DataError { public: using DataError::DataError; };
class BadCalibration : public DataError { public: using DataError::DataError; };
class UnrepresentableValue : public DataError { public: using DataError::DataError; };
class OverlappingAnnotations : public DataError { public: using DataError::DataError; };
class NonMultipleDuration : public DataError { public: using DataError::DataError; };
class NoSleepFound : public DataError { public: using DataError::DataError; };
class MissingChannel : public DataError { public: using DataError::DataError; };
class WindowOutOfBounds : public DataError { public: using DataError::DataError; };
class UnsupportedSamplingRate : public DataError { public: using DataError::DataError; };

// --- scattering ---
class InvalidParameters : public ConfigError { public: using ConfigError::ConfigError; };
class NonFiniteInput : public NumericError { public: using NumericError::NumericError; };

// --- diffusion ---
class DegenerateCloud : public DataError { public: using DataError::DataError; };
class EigenFailure : public NumericError { public: using NumericError::NumericError; };
class SizeMismatch : public DataError { public: using DataError::DataError; };
class IndexOutOfRange : public DataError { public: using DataError::DataError; };

// --- svm ---
class SingleClassInput : public DataError { public: using DataError::DataError; };
class NonFiniteFeature : public NumericError { public: using NumericError::NumericError; };
class DimensionMismatch : public DataError { public: using DataError::DataError; };

// --- evaluation ---
class LengthMismatch : public DataError { public: using DataError::DataError; };
class EmptyMatrix : public DataError { public: using DataError::DataError; };
class InsufficientSubjects : public DataError { public: using DataError::DataError; };
class TooFewPairs : public DataError { public: using DataError::DataError; };
class ZeroVariance : public DataError { public: using DataError::DataError; };

// --- pipeline / CLI ---
class MissingUpstream : public DataError { public: using DataError::DataError; };
class ConfigInvalid : public ConfigError { public: using ConfigError::ConfigError; };
class CacheCorrupt : public DataError { public: using DataError::DataError; };

}  // namespace sleepdyn
