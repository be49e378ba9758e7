#pragma once

#include <Eigen/Dense>

#include <stdexcept>
#include <string>
#include <vector>

namespace affdiff {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

/// Base class for all errors raised by the toolkit.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed or inconsistent input (bad dimensions, unknown names, invalid ranges).
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Configuration text that cannot be parsed (syntax, missing keys, wrong types).
class ParseError : public Error {
 public:
  using Error::Error;
};

/// File could not be read or written.
class IoError : public Error {
 public:
  using Error::Error;
};

/// A requested computation is undefined for the given input (disconnected graph,
/// unstable recursion, unsupported mode).
class DomainError : public Error {
 public:
  using Error::Error;
};

}  // namespace affdiff
