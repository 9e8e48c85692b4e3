#include "spatial/error.hpp"

namespace spatial {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::invalid_argument: return "invalid-argument";
    case ErrorCode::invalid_depth: return "invalid-depth";
    case ErrorCode::invalid_pose: return "invalid-pose";
    case ErrorCode::invalid_intrinsics: return "invalid-intrinsics";
    case ErrorCode::empty_cloud: return "empty-cloud";
    case ErrorCode::insufficient_views: return "insufficient-views";
    case ErrorCode::missing_file: return "missing-file";
    case ErrorCode::malformed_manifest: return "malformed-manifest";
    case ErrorCode::shape_mismatch: return "shape-mismatch";
    case ErrorCode::malformed_raster: return "malformed-raster";
    case ErrorCode::image_decode: return "image-decode";
    case ErrorCode::io_error: return "io-error";
    case ErrorCode::malformed_archive: return "malformed-archive";
    case ErrorCode::transport_timeout: return "transport-timeout";
    case ErrorCode::backend_failure: return "backend-failure";
    case ErrorCode::index_out_of_range: return "index-out-of-range";
    case ErrorCode::illegal_character: return "illegal-character";
    case ErrorCode::inconsistent_indentation: return "inconsistent-indentation";
    case ErrorCode::syntax_error: return "syntax-error";
    case ErrorCode::forbidden_construct: return "forbidden-construct";
    case ErrorCode::entry_function: return "entry-function";
    case ErrorCode::unknown_name: return "unknown-name";
    case ErrorCode::type_mismatch: return "type-mismatch";
    case ErrorCode::step_limit: return "step-limit";
    case ErrorCode::image_budget: return "image-budget";
    case ErrorCode::wall_clock: return "wall-clock";
    case ErrorCode::reconstruction_failed: return "reconstruction-failed";
    case ErrorCode::tool_failure: return "tool-failure";
    case ErrorCode::arithmetic_error: return "arithmetic-error";
    case ErrorCode::extraction_failed: return "extraction-failed";
    case ErrorCode::codegen_failed: return "codegen-failed";
    case ErrorCode::choice_parse: return "choice-parse";
    case ErrorCode::transport_failure: return "transport-failure";
    case ErrorCode::auth_failure: return "auth-failure";
    case ErrorCode::dataset_parse: return "dataset-parse";
    case ErrorCode::missing_image: return "missing-image";
    case ErrorCode::length_mismatch: return "length-mismatch";
  }
  return "unknown";
}

}  // namespace spatial
