#pragma once

#include <stdexcept>
#include <string>

namespace sipp {

// Base of every error thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Invalid parameters or arguments supplied by the caller.
class ParamError : public Error {
 public:
  using Error::Error;
};

// Malformed, inconsistent or unreadable data (files, vectors, dims).
class DataError : public Error {
 public:
  using Error::Error;
};

// A tuning search or acceptance check could not meet its target.
class TuningError : public Error {
 public:
  TuningError(const std::string& what, double best_achieved)
      : Error(what), best_achieved_(best_achieved) {}

  double best_achieved() const noexcept { return best_achieved_; }

 private:
  double best_achieved_;
};

}  // namespace sipp
