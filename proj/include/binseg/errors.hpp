#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <string_view>

namespace binseg {

enum class ErrorCode {
  io,
  bad_magic,
  unsupported_version,
  unsupported_dtype,
  bad_header,
  size_mismatch,
  non_finite,
  truncated,
  trailing_bytes,
  malformed_netpbm,
  label_overflow,
  invalid_argument,
  dimension_mismatch,
  geometry_mismatch,
  rank_deficient,
  degenerate_input,
  undefined_input,
  empty_input,
};

std::string_view to_string(ErrorCode code);

/// Base error for every failure raised by the library.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

/// A container or Netpbm parse failure, tagged with the byte offset at
/// which decoding stopped.
class FormatError : public Error {
 public:
  FormatError(ErrorCode code, std::size_t offset, const std::string& what);

  std::size_t offset() const noexcept { return offset_; }

 private:
  std::size_t offset_;
};

}  // namespace binseg
