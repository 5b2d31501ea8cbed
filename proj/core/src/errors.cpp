#include "dmlkit/errors.hpp"

namespace dml {

const char* errc_name(errc code) {
  switch (code) {
    case errc::format_error: return "FormatError";
    case errc::value_error: return "ValueError";
    case errc::empty_input: return "EmptyInput";
    case errc::truncated: return "TruncatedError";
    case errc::version_mismatch: return "VersionError";
    case errc::degenerate_row: return "DegenerateRow";
    case errc::unknown_class: return "UnknownClass";
    case errc::empty_split: return "EmptySplit";
    case errc::invalid_k: return "InvalidK";
    case errc::insufficient_data: return "InsufficientData";
    case errc::shape_error: return "ShapeError";
    case errc::need_two_classes: return "NeedTwoClasses";
    case errc::singleton_class: return "SingletonClass";
    case errc::degenerate_spectrum: return "DegenerateSpectrum";
    case errc::not_symmetric: return "NotSymmetric";
    case errc::numerical_failure: return "NumericalFailure";
    case errc::cannot_swap: return "CannotSwap";
    case errc::degenerate_axis: return "DegenerateAxis";
    case errc::not_normalized: return "NotNormalized";
    case errc::no_negatives: return "NoNegatives";
    case errc::non_finite: return "NonFinite";
    case errc::insufficient_support: return "InsufficientSupport";
    case errc::invalid_state: return "InvalidState";
    case errc::invalid_argument: return "InvalidArgument";
    case errc::io_error: return "IoError";
  }
  return "UnknownError";
}

}  // namespace dml
