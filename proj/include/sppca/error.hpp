#pragma once

#include <stdexcept>
#include <string>

namespace sppca {

/// Base class for every error raised by the library. `kind()` is a stable
/// machine-readable tag used by the CLI error JSON.
class Error : public std::runtime_error {
 public:
  Error(std::string kind, const std::string& what)
      : std::runtime_error(what), kind_(std::move(kind)) {}

  const std::string& kind() const noexcept { return kind_; }

 private:
  std::string kind_;
};

#define SPPCA_DEFINE_ERROR(Name)                                      \
  class Name : public Error {                                         \
   public:                                                            \
    explicit Name(const std::string& what) : Error(#Name, what) {}    \
  }

SPPCA_DEFINE_ERROR(DomainError);
SPPCA_DEFINE_ERROR(DimensionMismatch);
SPPCA_DEFINE_ERROR(SingularScatter);
SPPCA_DEFINE_ERROR(EmptyActiveSet);
SPPCA_DEFINE_ERROR(DegenerateStep);
SPPCA_DEFINE_ERROR(DegenerateScale);
SPPCA_DEFINE_ERROR(DegenerateSpectrum);
SPPCA_DEFINE_ERROR(GridNotFound);
SPPCA_DEFINE_ERROR(ConvergenceFailure);
SPPCA_DEFINE_ERROR(DivergentIntegral);
SPPCA_DEFINE_ERROR(EmptyData);
SPPCA_DEFINE_ERROR(ParseError);

#undef SPPCA_DEFINE_ERROR

}  // namespace sppca
