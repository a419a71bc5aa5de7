#pragma once

#include <stdexcept>

namespace scopegen {

/// Caller supplied arguments outside an operation's domain.
class InvalidInput : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// A user-supplied function broke its declared contract (e.g. q(y) <= 0).
class ContractViolation : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

/// A greedy sub-sampler was asked for a candidate when none remain.
class NoCandidates : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class GeneratorError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class OracleError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// The human oracle did not answer within its deadline.
class OracleTimeout : public OracleError {
 public:
  using OracleError::OracleError;
};

}  // namespace scopegen
