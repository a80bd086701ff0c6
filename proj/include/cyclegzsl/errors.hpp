#pragma once

#include <stdexcept>
#include <string>

namespace cyclegzsl {

// Every failure raised by the library derives from Error so callers can catch
// one type at the process boundary and map it to an exit code.
class Error : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// Operand shapes do not conform; the message names the operation.
class DimensionError : public Error {
public:
  using Error::Error;
};

/// A documented precondition was violated by the caller.
class ContractError : public Error {
public:
  using Error::Error;
};

/// The requested differentiation passes through an op that cannot support it.
class CapabilityError : public Error {
public:
  using Error::Error;
};

/// NaN or Inf encountered where finiteness is required.
class NumericError : public Error {
public:
  using Error::Error;
};

class IoError : public Error {
public:
  using Error::Error;
};

/// Input data violates a named dataset or protocol rule.
class ValidationError : public Error {
public:
  using Error::Error;
};

/// Training diverged; the message carries the stage and epoch.
class TrainingError : public Error {
public:
  using Error::Error;
};

class ConfigError : public Error {
public:
  using Error::Error;
};

class UsageError : public Error {
public:
  using Error::Error;
};

} // namespace cyclegzsl
