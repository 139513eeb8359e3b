#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace trilost {

enum class ErrorCode {
  // numerical
  RankDeficient,
  AmbiguousNullSpace,
  TooFewObservations,
  WrongArity,
  NotUnit,
  NotOrthonormal,
  NonSquarePixels,
  NonIsotropicNoise,
  CoincidentCameras,
  NoRealRoot,
  DegenerateBaseline,
  ParallelRays,
  Unobservable,
  // data / configuration
  InvalidInput,
  OutOfEnvelope,
  MissingMethod,
  MalformedHeader,
  MalformedRecord,
  TruncatedFile,
  IndexOutOfRange,
  UnsupportedFeature,
  PolicyRefused,
  Io,
};

std::string_view error_name(ErrorCode code);

// Data errors come from bad inputs, everything else is a numerical failure
// of an otherwise well-formed problem. The CLI maps them to exit codes 2 / 3.
bool is_data_error(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(what), code_(code) {}
  ErrorCode code() const { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& what) {
  throw Error(code, what);
}

}  // namespace trilost
