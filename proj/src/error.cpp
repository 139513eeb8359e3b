#include "trilost/error.hpp"

namespace trilost {

std::string_view error_name(ErrorCode code) {
  switch (code) {
    case ErrorCode::RankDeficient: return "RankDeficient";
    case ErrorCode::AmbiguousNullSpace: return "AmbiguousNullSpace";
    case ErrorCode::TooFewObservations: return "TooFewObservations";
    case ErrorCode::WrongArity: return "WrongArity";
    case ErrorCode::NotUnit: return "NotUnit";
    case ErrorCode::NotOrthonormal: return "NotOrthonormal";
    case ErrorCode::NonSquarePixels: return "NonSquarePixels";
    case ErrorCode::NonIsotropicNoise: return "NonIsotropicNoise";
    case ErrorCode::CoincidentCameras: return "CoincidentCameras";
    case ErrorCode::NoRealRoot: return "NoRealRoot";
    case ErrorCode::DegenerateBaseline: return "DegenerateBaseline";
    case ErrorCode::ParallelRays: return "ParallelRays";
    case ErrorCode::Unobservable: return "Unobservable";
    case ErrorCode::InvalidInput: return "InvalidInput";
    case ErrorCode::OutOfEnvelope: return "OutOfEnvelope";
    case ErrorCode::MissingMethod: return "MissingMethod";
    case ErrorCode::MalformedHeader: return "MalformedHeader";
    case ErrorCode::MalformedRecord: return "MalformedRecord";
    case ErrorCode::TruncatedFile: return "TruncatedFile";
    case ErrorCode::IndexOutOfRange: return "IndexOutOfRange";
    case ErrorCode::UnsupportedFeature: return "UnsupportedFeature";
    case ErrorCode::PolicyRefused: return "PolicyRefused";
    case ErrorCode::Io: return "Io";
  }
  return "Unknown";
}

bool is_data_error(ErrorCode code) {
  switch (code) {
    case ErrorCode::InvalidInput:
    case ErrorCode::OutOfEnvelope:
    case ErrorCode::MissingMethod:
    case ErrorCode::MalformedHeader:
    case ErrorCode::MalformedRecord:
    case ErrorCode::TruncatedFile:
    case ErrorCode::IndexOutOfRange:
    case ErrorCode::UnsupportedFeature:
    case ErrorCode::PolicyRefused:
    case ErrorCode::Io:
    case ErrorCode::NotUnit:
    case ErrorCode::NotOrthonormal:
      return true;
    default:
      return false;
  }
}

}  // namespace trilost
