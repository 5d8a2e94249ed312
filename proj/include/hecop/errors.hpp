#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace hecop {

/// Base for every error raised by the library. The CLI maps subclasses to
/// exit codes: validation problems to 2, numeric problems to 3.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class InvalidArgument : public Error {
 public:
  using Error::Error;
};

class UnsupportedRank : public InvalidArgument {
 public:
  using InvalidArgument::InvalidArgument;
};

/// Input sits on a reflecting hyperplane or a coth pole.
class SingularInput : public Error {
 public:
  using Error::Error;
};

class NumericFailure : public Error {
 public:
  using Error::Error;
};

/// Importance-sampling estimate with too small an effective sample size.
class UnreliableEstimate : public NumericFailure {
 public:
  using NumericFailure::NumericFailure;
};

/// Adaptive step size fell below the configured floor.
class StepFailure : public NumericFailure {
 public:
  StepFailure(double time_reached, std::size_t replica, const std::string& what)
      : NumericFailure(what + " (t=" + std::to_string(time_reached) +
                       ", replica=" + std::to_string(replica) + ")"),
        time_reached_(time_reached),
        replica_(replica) {}

  double time_reached() const noexcept { return time_reached_; }
  std::size_t replica() const noexcept { return replica_; }

 private:
  double time_reached_;
  std::size_t replica_;
};

}  // namespace hecop
