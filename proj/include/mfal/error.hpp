#ifndef MFAL_ERROR_HPP
#define MFAL_ERROR_HPP

#include <stdexcept>
#include <string>

namespace mfal {

/// Base class of every error raised by the library. `kind()` is a stable
/// identifier usable in diagnostics and tests.
class Error : public std::runtime_error {
public:
  Error(std::string kind, const std::string &what)
      : std::runtime_error(kind + ": " + what), kind_(std::move(kind)) {}

  const std::string &kind() const noexcept { return kind_; }

private:
  std::string kind_;
};

#define MFAL_DEFINE_ERROR(Name)                                                \
  class Name : public Error {                                                  \
  public:                                                                      \
    explicit Name(const std::string &what) : Error(#Name, what) {}             \
  }

MFAL_DEFINE_ERROR(ShapeMismatch);
MFAL_DEFINE_ERROR(NotPositiveDefinite);
MFAL_DEFINE_ERROR(SolverSingular);
MFAL_DEFINE_ERROR(NonlinearSolveFailed);
MFAL_DEFINE_ERROR(OutOfDomain);
MFAL_DEFINE_ERROR(UnknownFidelity);
MFAL_DEFINE_ERROR(NotFitted);
MFAL_DEFINE_ERROR(NonFiniteLoss);
MFAL_DEFINE_ERROR(NegativeMI);
MFAL_DEFINE_ERROR(DegenerateExpansion);
MFAL_DEFINE_ERROR(ZeroNormalizer);
MFAL_DEFINE_ERROR(MissingArtifacts);
MFAL_DEFINE_ERROR(ConfigError);
MFAL_DEFINE_ERROR(IoError);

#undef MFAL_DEFINE_ERROR

} // namespace mfal

#endif
