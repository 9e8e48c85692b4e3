#pragma once

#include "spatial/bundle.hpp"
#include "spatial/point_cloud.hpp"
#include "spatial/renderer.hpp"
#include "spatial/scene.hpp"
#include "spatial/spl/ast.hpp"

#include <cstdint>
#include <functional>
#include <string>
#include <string_view>
#include <vector>

namespace spatial::spl {

struct ExecutionLimits {
  std::int64_t max_steps = 100000;
  std::int64_t max_rendered_images = 32;
  /// Per `for` statement; exceeding it is a step_limit error.
  std::int64_t max_loop_iterations = 10000;
  double wall_clock_budget = 30.0;  // seconds

  /// Throws invalid_argument unless every field is positive.
  void validate() const;
};

enum class OutputKind { text, image, image_list };
std::string_view to_string(OutputKind kind);

struct ProgramOutput {
  OutputKind kind = OutputKind::text;
  std::string text;           // kind == text
  std::vector<Image> images;  // kind == image (one) or image_list (one or more)
  std::vector<TraceRecord> trace;
  /// Source comments, kept for readers of the trace; not evaluated.
  std::vector<Comment> comments;
};

/// Supplies the reconstruction for `pySpatial.reconstruct`. Called at most
/// once per execution. Any exception becomes reconstruction_failed.
using BundleProvider = std::function<ReconstructionBundle(const Scene&)>;

struct ToolOptions {
  RenderOptions render;
  PointCloudOptions cloud;
  /// Used when a pose call omits its angle (degrees) or distance (scene units).
  double rotation_deg = kDefaultRotationDeg;
  double move_step = kDefaultMoveStep;
};

/// Runs `program(scene)` in the sandbox. Runtime failures are ProgramError
/// (unknown_name, type_mismatch, index_out_of_range, arithmetic_error,
/// step_limit, image_budget, wall_clock, reconstruction_failed,
/// tool_failure) located at the failing expression and carrying the trace
/// so far. Deterministic for a fixed program, scene and bundle.
ProgramOutput execute(const Program& program, const Scene& scene, const BundleProvider& bundle_provider,
                      const ExecutionLimits& limits = {}, const ToolOptions& tools = {});

/// One JSON object per line: {"step", "call", "args_summary", "output_kind"}.
std::string trace_to_jsonl(const std::vector<TraceRecord>& trace);

/// Python-style repr of a double ("1.0", "0.0001", "1e-05", "inf").
std::string format_python_float(double value);

}  // namespace spatial::spl
