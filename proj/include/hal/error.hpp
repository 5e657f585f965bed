#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace hal {

/// Root of every exception thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A caller broke a documented precondition (bad shape, out-of-range id, ...).
class InvalidArgument : public Error {
 public:
  using Error::Error;
};

/// Input data could not be ingested or decoded.
class DataError : public Error {
 public:
  using Error::Error;
};

/// Numerical failure: non-finite loss, non-converging factorization.
class NumericError : public Error {
 public:
  using Error::Error;
};

class DivergenceError : public NumericError {
 public:
  DivergenceError(const std::string& what, std::size_t epoch, std::size_t batch)
      : NumericError(what), epoch_(epoch), batch_(batch) {}

  std::size_t epoch() const noexcept { return epoch_; }
  std::size_t batch() const noexcept { return batch_; }

 private:
  std::size_t epoch_;
  std::size_t batch_;
};

}  // namespace hal
