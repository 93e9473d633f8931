#pragma once

#include <stdexcept>
#include <string>

namespace ffward {

// Error categories. Kept as codes (not a type per failure) so tests and
// callers can distinguish failures without string matching.
enum class errc {
  invalid_config,
  bad_magic,
  bad_version,
  truncated,
  dim_mismatch,
  short_buffer,
  unknown_kind,
  length_mismatch,
  empty_input,
  out_of_range,
  missing_file,
  unknown_method,
  io_failure,
};

inline const char* errc_name(errc c) {
  switch (c) {
    case errc::invalid_config: return "invalid_config";
    case errc::bad_magic: return "bad_magic";
    case errc::bad_version: return "bad_version";
    case errc::truncated: return "truncated";
    case errc::dim_mismatch: return "dim_mismatch";
    case errc::short_buffer: return "short_buffer";
    case errc::unknown_kind: return "unknown_kind";
    case errc::length_mismatch: return "length_mismatch";
    case errc::empty_input: return "empty_input";
    case errc::out_of_range: return "out_of_range";
    case errc::missing_file: return "missing_file";
    case errc::unknown_method: return "unknown_method";
    case errc::io_failure: return "io_failure";
  }
  return "unknown";
}

class Error : public std::runtime_error {
 public:
  Error(errc code, const std::string& what)
      : std::runtime_error(std::string(errc_name(code)) + ": " + what), code_(code) {}

  errc code() const { return code_; }

 private:
  errc code_;
};

[[noreturn]] inline void fail(errc code, const std::string& what) { throw Error(code, what); }

inline void require(bool cond, errc code, const std::string& what) {
  if (!cond) fail(code, what);
}

}  // namespace ffward
