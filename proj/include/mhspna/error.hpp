#pragma once

#include <stdexcept>
#include <string>

namespace mhspna {

/// Base class for all errors raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Bad input data: malformed geometry, invalid parameters, unresolvable
/// count points, singular systems. The CLI maps these to exit code 1.
class DataError : public Error {
 public:
  using Error::Error;
};

/// File or usage problems. The CLI maps these to exit code 2.
class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace mhspna
