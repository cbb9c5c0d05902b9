#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace fuselab {

/// Base of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class IndexError : public Error {
 public:
  using Error::Error;
};

/// Invariant violation on a grid, stack or configuration.
class ValidationError : public Error {
 public:
  enum class Reason {
    kBadDims,
    kSizeMismatch,
    kRangeViolation,
    kNonFinite,
    kDimensionMismatch,
    kMixedKinds,
    kUnsupportedKind,
    kDuplicateId,
    kEmptyStack,
    kBadConfig,
  };

  ValidationError(Reason reason, const std::string& what)
      : Error(what), reason_(reason) {}

  Reason reason() const noexcept { return reason_; }

 private:
  Reason reason_;
};

/// Malformed SVOL file.
class FormatError : public Error {
 public:
  enum class Reason {
    kIo,
    kBadMagic,
    kBadHeader,
    kHeaderMismatch,
    kRangeViolation,
    kTruncated,
    kTrailingBytes,
  };

  FormatError(Reason reason, const std::string& what)
      : Error(what), reason_(reason) {}

  Reason reason() const noexcept { return reason_; }

 private:
  Reason reason_;
};

/// Exact enumeration over 2^m vote combinations was requested past the guard.
class CapacityError : public Error {
 public:
  using Error::Error;
};

/// A posterior class has zero total mass, so the M-step ratio is undefined.
/// Carries the objective trace accumulated before the failure.
class DegeneratePosterior : public Error {
 public:
  enum class Side { kSensitivity, kSpecificity };

  DegeneratePosterior(Side side, std::vector<double> partial_trace = {})
      : Error(side == Side::kSensitivity
                  ? "degenerate posterior: sum of w(1) is zero, sensitivity undefined"
                  : "degenerate posterior: sum of w(0) is zero, specificity undefined"),
        side_(side),
        partial_trace_(std::move(partial_trace)) {}

  Side side() const noexcept { return side_; }
  const std::vector<double>& partial_trace() const noexcept { return partial_trace_; }
  void set_partial_trace(std::vector<double> trace) { partial_trace_ = std::move(trace); }

 private:
  Side side_;
  std::vector<double> partial_trace_;
};

}  // namespace fuselab
