#pragma once

#include <stdexcept>
#include <string>

namespace dml {

// Machine-readable failure categories. The CLI maps these to exit code 2
// and a JSON error object; tests assert on them directly.
enum class errc {
  format_error,
  value_error,
  empty_input,
  truncated,
  version_mismatch,
  degenerate_row,
  unknown_class,
  empty_split,
  invalid_k,
  insufficient_data,
  shape_error,
  need_two_classes,
  singleton_class,
  degenerate_spectrum,
  not_symmetric,
  numerical_failure,
  cannot_swap,
  degenerate_axis,
  not_normalized,
  no_negatives,
  non_finite,
  insufficient_support,
  invalid_state,
  invalid_argument,
  io_error,
};

const char* errc_name(errc code);

class Error : public std::runtime_error {
 public:
  Error(errc code, std::string message, long detail_a = -1, long detail_b = -1)
      : std::runtime_error(std::move(message)),
        code_(code),
        detail_a_(detail_a),
        detail_b_(detail_b) {}

  errc code() const { return code_; }
  const char* code_name() const { return errc_name(code_); }

  // Context-dependent detail, e.g. line for parse errors, row/class index
  // for data errors. -1 when not applicable.
  long detail_a() const { return detail_a_; }
  long detail_b() const { return detail_b_; }

 private:
  errc code_;
  long detail_a_;
  long detail_b_;
};

}  // namespace dml
