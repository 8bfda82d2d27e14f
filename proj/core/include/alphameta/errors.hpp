#pragma once

#include <stdexcept>
#include <string>

namespace alphameta {

// Base of everything the library throws on bad input or failed numerics.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class InvalidArgument : public Error {
 public:
  using Error::Error;
};

// A documented precondition (e.g. the hinge embedding's norm constraint) does not hold.
class PreconditionError : public InvalidArgument {
 public:
  using InvalidArgument::InvalidArgument;
};

class ParseError : public Error {
 public:
  using Error::Error;
};

class NumericalError : public Error {
 public:
  using Error::Error;
};

class DivergenceError : public NumericalError {
 public:
  DivergenceError(long iteration, double last_finite_loss, const std::string& what)
      : NumericalError(what), iteration_(iteration), last_finite_loss_(last_finite_loss) {}
  long iteration() const noexcept { return iteration_; }
  double last_finite_loss() const noexcept { return last_finite_loss_; }

 private:
  long iteration_;
  double last_finite_loss_;
};

}  // namespace alphameta
