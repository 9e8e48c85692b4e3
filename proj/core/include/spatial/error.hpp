#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace spatial {

/// Every failure the engine reports carries one of these codes. The pipeline
/// maps codes onto failure stages, so codes are never reused across meanings.
enum class ErrorCode {
  // geometry / renderer
  invalid_argument,
  invalid_depth,
  invalid_pose,
  invalid_intrinsics,
  empty_cloud,
  insufficient_views,
  // bundle I/O and reconstruction backends
  missing_file,
  malformed_manifest,
  shape_mismatch,
  malformed_raster,
  image_decode,
  io_error,
  malformed_archive,
  transport_timeout,
  backend_failure,
  index_out_of_range,
  // program language
  illegal_character,
  inconsistent_indentation,
  syntax_error,
  forbidden_construct,
  entry_function,
  unknown_name,
  type_mismatch,
  step_limit,
  image_budget,
  wall_clock,
  reconstruction_failed,
  tool_failure,
  arithmetic_error,
  // agent
  extraction_failed,
  codegen_failed,
  choice_parse,
  transport_failure,
  auth_failure,
  // bench
  dataset_parse,
  missing_image,
  length_mismatch,
};

std::string_view to_string(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace spatial
