#pragma once

#include "spatial/agent/agent.hpp"
#include "spatial/error.hpp"

#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace spatial::agent {

enum class FailureStage { reconstruction, program_generation, execution, answer };

std::string_view to_string(FailureStage stage);
FailureStage parse_failure_stage(std::string_view text);

/// Stage an error code is attributed to when it escapes that stage. Codes
/// raised while the program runs map to execution except the reconstruction
/// family.
FailureStage execution_failure_stage(ErrorCode code);

struct StageTimings {
  double codegen = 0.0;
  double execution = 0.0;  // includes reconstruction
  double reconstruction = 0.0;
  double answer = 0.0;
};

struct QueryResult {
  Answer answer;
  /// The first failure; unset when the with-clue path succeeded.
  std::optional<FailureStage> failure;
  std::optional<ErrorCode> failure_code;
  std::string failure_message;
  std::string reasoning;
  std::string program_text;
  std::optional<spl::ProgramOutput> output;
  std::vector<spl::TraceRecord> trace;  // full or partial
  int codegen_requests = 0;
  StageTimings timings;
};

struct PipelineOptions {
  AgentConfig agent;
  spl::ExecutionLimits limits;
  spl::ToolOptions tools;
};

/// codegen -> execute -> answer with clue. Any failure is tagged with its
/// stage and the query falls back to answering without the clue, so a
/// QueryResult always carries an Answer. Only invalid options throw.
QueryResult run_query(const Scene& scene, const AnswerSpace& space, const spl::BundleProvider& bundles,
                      ChatClient& client, const PipelineOptions& options = {});

}  // namespace spatial::agent
