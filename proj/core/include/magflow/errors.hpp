#pragma once

#include <stdexcept>
#include <string>

namespace magflow {

// Base of every error raised by the library. `kind()` is a stable, machine
// readable tag used by the CLI diagnostics and by tests.
class Error : public std::runtime_error {
 public:
  Error(std::string kind, const std::string& what)
      : std::runtime_error(what), kind_(std::move(kind)) {}

  const std::string& kind() const noexcept { return kind_; }

 private:
  std::string kind_;
};

#define MAGFLOW_DEFINE_ERROR(Name)                                  \
  class Name : public Error {                                       \
   public:                                                          \
    explicit Name(const std::string& what) : Error(#Name, what) {} \
  }

MAGFLOW_DEFINE_ERROR(NearZeroVector);
MAGFLOW_DEFINE_ERROR(DegenerateTriangle);
MAGFLOW_DEFINE_ERROR(InvalidArgument);
MAGFLOW_DEFINE_ERROR(NonConvexFiber);
MAGFLOW_DEFINE_ERROR(UnsupportedLagrangian);
MAGFLOW_DEFINE_ERROR(StepExplosion);
MAGFLOW_DEFINE_ERROR(StepTooLarge);
MAGFLOW_DEFINE_ERROR(InvalidLoop);
MAGFLOW_DEFINE_ERROR(ValleyCollapse);
MAGFLOW_DEFINE_ERROR(MaxIterations);
MAGFLOW_DEFINE_ERROR(EndpointNotMinimal);
MAGFLOW_DEFINE_ERROR(NotSymmetric);
MAGFLOW_DEFINE_ERROR(NoNegativeConfiguration);
MAGFLOW_DEFINE_ERROR(ParseError);
MAGFLOW_DEFINE_ERROR(ValidationError);

#undef MAGFLOW_DEFINE_ERROR

}  // namespace magflow
