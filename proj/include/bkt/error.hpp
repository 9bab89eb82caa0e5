#ifndef BKT_ERROR_HPP
#define BKT_ERROR_HPP

#include <stdexcept>
#include <string>

namespace bkt {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Bad user input: missing columns, malformed rows, invalid options.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// A mapped column is absent from the input header.
class SchemaError : public ConfigError {
 public:
  using ConfigError::ConfigError;
};

/// A single input row failed validation. `row()` is the 1-based data row
/// (the header is row 0).
class RowError : public ConfigError {
 public:
  RowError(std::size_t row, const std::string& what)
      : ConfigError("row " + std::to_string(row) + ": " + what), row_(row) {}
  std::size_t row() const noexcept { return row_; }

 private:
  std::size_t row_;
};

/// Numerical or estimation failure (no finite start, divergent ELBO, ...).
class FitError : public Error {
 public:
  using Error::Error;
};

}  // namespace bkt

#endif  // BKT_ERROR_HPP
