#ifndef SPARSELQ_ERRORS_HPP
#define SPARSELQ_ERRORS_HPP

/**
 * @file
 * @brief Exception types raised by the sparselq solvers.
 */

#include <stdexcept>
#include <string>

namespace sparselq {

/// Base class of every error thrown by this library.
class Error : public std::runtime_error
{
public:
  using std::runtime_error::runtime_error;
};

class DimensionMismatch : public Error
{
public:
  using Error::Error;
};

/// One of the standing plant assumptions does not hold; `which()` names it.
class AssumptionViolated : public Error
{
public:
  explicit AssumptionViolated(std::string which)
      : Error("assumption violated: " + which), which_(std::move(which))
  {}
  const std::string & which() const noexcept { return which_; }

private:
  std::string which_;
};

class ForcedZeroOutOfRange : public Error
{
public:
  using Error::Error;
};

class NonPositiveRho : public Error
{
public:
  using Error::Error;
};

class InvalidPqParams : public Error
{
public:
  using Error::Error;
};

class NonPositiveSigma : public Error
{
public:
  using Error::Error;
};

class InvalidOption : public Error
{
public:
  using Error::Error;
};

class EigFailure : public Error
{
public:
  using Error::Error;
};

class NotPositiveDefinite : public Error
{
public:
  using Error::Error;
};

class PsiNotNegativeSemidefinite : public Error
{
public:
  using Error::Error;
};

class SingularW1 : public Error
{
public:
  using Error::Error;
};

class NotHurwitz : public Error
{
public:
  using Error::Error;
};

class TooLarge : public Error
{
public:
  using Error::Error;
};

class K0NotStabilizing : public Error
{
public:
  using Error::Error;
};

class NoConvergence : public Error
{
public:
  using Error::Error;
};

class ParseError : public Error
{
public:
  using Error::Error;
};

class UnknownKey : public ParseError
{
public:
  using ParseError::ParseError;
};

}  // namespace sparselq

#endif  // SPARSELQ_ERRORS_HPP
