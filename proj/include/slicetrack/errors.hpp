#pragma once

#include <stdexcept>
#include <string>

namespace slicetrack {

enum class Errc {
  empty_overlap,
  degenerate_range,
  shape_mismatch,
  missing_slice,
  all_invalid,
  domain_error,
  malformed_header,
  size_mismatch,
  bad_magic,
  unsupported_feature,
  too_few_volumes,
  degenerate_truth,
  calibration_missing,
  bad_config,
  io_failure,
};

const char* errc_name(Errc c) noexcept;

// Exit-code category for the CLI: 2 = data error, 3 = numeric failure.
int errc_exit_code(Errc c) noexcept;

class Error : public std::runtime_error {
 public:
  Error(Errc c, const std::string& msg)
      : std::runtime_error(std::string(errc_name(c)) + ": " + msg), code_(c) {}

  Errc code() const noexcept { return code_; }
  const char* name() const noexcept { return errc_name(code_); }

 private:
  Errc code_;
};

[[noreturn]] inline void raise(Errc c, const std::string& msg) { throw Error(c, msg); }

}  // namespace slicetrack
