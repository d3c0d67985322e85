#pragma once

#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

namespace calfmon {

enum class Errc {
  malformed_header,
  empty_recording,
  unsupported_mode,
  bad_header,
  bad_row,
  range_exceeded,
  too_short,
  degenerate_labels,
  bad_config,
  no_valid_positions,
  shape_mismatch,
  singular_input,
  bad_magic,
  version_unsupported,
  truncated,
  too_few_groups,
  unknown_label,
  empty_class_row,
  bad_range,
  bad_profile,
  validation_failed,
  unknown_calf,
  parse_failed,
  model_missing,
  recording_missing,
  no_data,
  io_error,
};

std::string_view to_string(Errc code) noexcept;

// Every failure in the library surfaces as this exception; `code()` names the
// contract violation and `line()` carries the row number for text parsers.
class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& message, std::optional<std::size_t> line = std::nullopt)
      : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code), line_(line) {}

  Errc code() const noexcept { return code_; }
  std::optional<std::size_t> line() const noexcept { return line_; }

 private:
  Errc code_;
  std::optional<std::size_t> line_;
};

}  // namespace calfmon
