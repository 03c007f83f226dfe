#pragma once

#include <stdexcept>
#include <string>

namespace troop {

enum class ErrorKind {
  RankDeficient,
  SingularPairing,
  DimensionMismatch,
  NonFiniteState,
  BlowUp,
  LineSearchFailed,
  NotHurwitz,
  NearSingularGramian,
  InvalidArgument,
  Io,
};

const char* to_string(ErrorKind kind);

/// Every failure raised by the library carries one of the kinds above so that
/// callers (notably the CLI) can map it to an exit status.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

  /// True for failures of the numerics (blow-up, line search) rather than of the inputs.
  bool is_numerical() const noexcept {
    return kind_ == ErrorKind::NonFiniteState || kind_ == ErrorKind::BlowUp ||
           kind_ == ErrorKind::LineSearchFailed;
  }

 private:
  ErrorKind kind_;
};

/// ROM solve for a particular trajectory produced a non-finite state.
class BlowUpError : public Error {
 public:
  explicit BlowUpError(std::size_t trajectory)
      : Error(ErrorKind::BlowUp, "reduced model diverged on trajectory " + std::to_string(trajectory)),
        trajectory_(trajectory) {}

  std::size_t trajectory() const noexcept { return trajectory_; }

 private:
  std::size_t trajectory_;
};

}  // namespace troop
