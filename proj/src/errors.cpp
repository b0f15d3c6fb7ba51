#include "slicetrack/errors.hpp"

namespace slicetrack {

const char* errc_name(Errc c) noexcept {
  switch (c) {
    case Errc::empty_overlap: return "EmptyOverlap";
    case Errc::degenerate_range: return "DegenerateRange";
    case Errc::shape_mismatch: return "ShapeMismatch";
    case Errc::missing_slice: return "MissingSlice";
    case Errc::all_invalid: return "AllInvalid";
    case Errc::domain_error: return "DomainError";
    case Errc::malformed_header: return "MalformedHeader";
    case Errc::size_mismatch: return "SizeMismatch";
    case Errc::bad_magic: return "BadMagic";
    case Errc::unsupported_feature: return "UnsupportedFeature";
    case Errc::too_few_volumes: return "TooFewVolumes";
    case Errc::degenerate_truth: return "DegenerateTruth";
    case Errc::calibration_missing: return "CalibrationMissing";
    case Errc::bad_config: return "BadConfig";
    case Errc::io_failure: return "IoFailure";
  }
  return "UnknownError";
}

int errc_exit_code(Errc c) noexcept {
  switch (c) {
    case Errc::bad_config:
      return 1;  // usage
    case Errc::empty_overlap:
    case Errc::all_invalid:
    case Errc::domain_error:
    case Errc::degenerate_range:
    case Errc::degenerate_truth:
      return 3;  // numeric failure
    default:
      return 2;  // data error
  }
}

}  // namespace slicetrack
