#pragma once

#include <stdexcept>
#include <string>

namespace toda {

// Base class for every failure raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Invalid input: violated preconditions, malformed configuration.
class InvalidArgument : public Error {
 public:
  using Error::Error;
};

// A numerical procedure could not produce a trustworthy answer.
class NumericalError : public Error {
 public:
  using Error::Error;
};

}  // namespace toda
