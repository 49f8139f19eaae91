#pragma once

#include <stdexcept>
#include <string>

namespace fairnvt {

// Base for all errors raised by the library.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Dimension or rank mismatch in a tensor operation.
struct ShapeError : Error {
  using Error::Error;
};

// Invalid numeric argument (NaN/Inf construction, non-positive clip norm, ...).
struct ValueError : Error {
  using Error::Error;
};

// Bad configuration: unknown key, unparsable value, invalid flag combination.
struct ConfigError : Error {
  using Error::Error;
};

// Malformed external input: CSV schema, checkpoint layout, truncation.
struct FormatError : Error {
  using Error::Error;
};

// Checkpoint carries a version this build does not understand.
struct VersionError : Error {
  using Error::Error;
};

// Metric is undefined on the given records (absent class, single group, empty cell).
struct MetricError : Error {
  using Error::Error;
};

// Training produced a non-finite loss or gradient and was aborted.
struct NumericAbort : Error {
  using Error::Error;
};

}  // namespace fairnvt
