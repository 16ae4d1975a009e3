#pragma once

#include <stdexcept>
#include <string>

namespace d2i {

// Base class for all toolkit errors so callers can catch one type.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Malformed input file (embedding line, TSV record, IDX header, checkpoint).
struct FormatError : Error {
  using Error::Error;
};

// Structurally valid input that cannot be used (empty table, all rows elided).
struct DataError : Error {
  using Error::Error;
};

// Invalid or inconsistent configuration (bad enum value, geometry mismatch).
struct ConfigError : Error {
  using Error::Error;
};

// Training loss blew up; retry with a smaller learning rate.
struct DivergenceError : Error {
  using Error::Error;
};

struct IoError : Error {
  using Error::Error;
};

}  // namespace d2i
