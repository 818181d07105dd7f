#pragma once

#include <stdexcept>
#include <string>

namespace gpmpc {

// Curvilinear dynamics evaluated where 1 - n*kappa is within the singularity
// guard, i.e. the point sits at or beyond the local center of curvature.
class SingularityError : public std::domain_error {
 public:
  explicit SingularityError(const std::string& what) : std::domain_error(what) {}
};

// Projection onto the centerline failed: no valid local minimizer, or the
// lateral offset reaches the local curvature radius.
class ProjectionError : public std::domain_error {
 public:
  explicit ProjectionError(const std::string& what) : std::domain_error(what) {}
};

// Malformed track description (non-monotone breakpoints, bad closure, ...).
class TrackError : public std::runtime_error {
 public:
  explicit TrackError(const std::string& what) : std::runtime_error(what) {}
};

// A matrix factorization that must succeed did not (Gram matrix not positive
// definite after jitter, QP Hessian singular, ...).
class IllConditionedError : public std::runtime_error {
 public:
  explicit IllConditionedError(const std::string& what)
      : std::runtime_error(what) {}
};

// Catch-all for numerical failures that are not conditioning problems
// (non-finite values, iteration limits where a result is mandatory, ...).
class NumericalError : public std::runtime_error {
 public:
  explicit NumericalError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace gpmpc
