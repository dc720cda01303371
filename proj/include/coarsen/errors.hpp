#pragma once

#include <stdexcept>
#include <string>

namespace coarsen {

// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// An argument lies outside the mathematical domain of an operation.
class DomainError : public Error {
 public:
  using Error::Error;
};

// Inconsistent grid steps, bin widths, normalizations or experiment fields.
class ConfigError : public Error {
 public:
  using Error::Error;
};

// Input that makes the problem ill-posed (empty species 2, kernel with all
// mass at the origin).
class DegenerateError : public Error {
 public:
  using Error::Error;
};

// The species-2 population is exhausted, or a query lies past the time
// horizon on which a solution is defined.
class HorizonError : public Error {
 public:
  using Error::Error;
};

}  // namespace coarsen
