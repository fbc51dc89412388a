#pragma once

#include <stdexcept>
#include <string>

namespace stabdom {

/// Base class for every failure raised by the toolkit.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class NonFiniteEvaluation : public Error {
 public:
  NonFiniteEvaluation(int component, const std::string& what)
      : Error(what), component_(component) {}
  /// Index of the first non-finite output component.
  int component() const noexcept { return component_; }

 private:
  int component_;
};

class EigenFailure : public Error {
 public:
  using Error::Error;
};

/// The platform coincides with a winder (zero cable length).
class DegenerateConfiguration : public Error {
 public:
  DegenerateConfiguration(int winder, const std::string& what) : Error(what), winder_(winder) {}
  int winder() const noexcept { return winder_; }

 private:
  int winder_;
};

class SynthesisFailure : public Error {
 public:
  using Error::Error;
};

/// Bordered tangent system is singular; usually signals a singular point.
class TangentFailure : public Error {
 public:
  using Error::Error;
};

class CorrectorFailure : public Error {
 public:
  using Error::Error;
};

class SpuriousEvent : public Error {
 public:
  using Error::Error;
};

class InitFailure : public Error {
 public:
  using Error::Error;
};

class IntegrationFailure : public Error {
 public:
  using Error::Error;
};

class PreconditionViolation : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

}  // namespace stabdom
