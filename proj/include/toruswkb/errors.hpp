#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace toruswkb {

/// Base class of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class InvalidArgument : public Error {
 public:
  using Error::Error;
};

class DimensionError : public Error {
 public:
  using Error::Error;
};

class GridMismatch : public Error {
 public:
  using Error::Error;
};

/// An iterative solver ran out of iterations. `final_change` is the last
/// measured update size (solver specific).
class NonConvergence : public Error {
 public:
  NonConvergence(const std::string& what, double final_change)
      : Error(what), final_change_(final_change) {}
  double final_change() const { return final_change_; }

 private:
  double final_change_;
};

class ParticleOutsideDomain : public Error {
 public:
  ParticleOutsideDomain(const std::string& what, std::size_t index)
      : Error(what), index_(index) {}
  std::size_t index() const { return index_; }

 private:
  std::size_t index_;
};

class CflViolation : public Error {
 public:
  using Error::Error;
};

class EmptySupport : public Error {
 public:
  using Error::Error;
};

class ResolutionError : public Error {
 public:
  using Error::Error;
};

class MomentumWindowExceeded : public Error {
 public:
  using Error::Error;
};

class WindowTooSmall : public Error {
 public:
  using Error::Error;
};

class OptFailed : public Error {
 public:
  using Error::Error;
};

class Infeasible : public Error {
 public:
  using Error::Error;
};

}  // namespace toruswkb
