#include "spatial/agent/pipeline.hpp"

#include "spatial/spl/lexer.hpp"

#include <chrono>

namespace spatial::agent {

std::string_view to_string(FailureStage stage) {
  switch (stage) {
    case FailureStage::reconstruction: return "reconstruction";
    case FailureStage::program_generation: return "program-generation";
    case FailureStage::execution: return "execution";
    case FailureStage::answer: return "answer";
  }
  return "execution";
}

FailureStage parse_failure_stage(std::string_view text) {
  for (const auto s : {FailureStage::reconstruction, FailureStage::program_generation, FailureStage::execution,
                       FailureStage::answer}) {
    if (text == to_string(s)) return s;
  }
  throw Error(ErrorCode::invalid_argument, "unknown failure stage '" + std::string(text) + "'");
}

FailureStage execution_failure_stage(ErrorCode code) {
  switch (code) {
    case ErrorCode::reconstruction_failed:
    case ErrorCode::missing_file:
    case ErrorCode::malformed_manifest:
    case ErrorCode::shape_mismatch:
    case ErrorCode::malformed_raster:
    case ErrorCode::malformed_archive:
    case ErrorCode::transport_timeout:
    case ErrorCode::backend_failure:
      return FailureStage::reconstruction;
    default:
      return FailureStage::execution;
  }
}

namespace {

using Clock = std::chrono::steady_clock;

double since(Clock::time_point t) {
  return std::chrono::duration<double>(Clock::now() - t).count();
}

void record_failure(QueryResult& r, FailureStage stage, ErrorCode code, const std::string& message) {
  if (r.failure) return;
  r.failure = stage;
  r.failure_code = code;
  r.failure_message = message;
}

void fall_back(QueryResult& r, const Scene& scene, const AnswerSpace& space, ChatClient& client,
               const AgentConfig& config) {
  const auto t = Clock::now();
  try {
    r.answer = answer_without_clue(scene, space, client, config);
  } catch (const Error& e) {
    record_failure(r, FailureStage::answer, e.code(), e.what());
    r.answer = Answer{"", Choice{}, AnswerStage::without_clue};
  } catch (const std::exception& e) {
    record_failure(r, FailureStage::answer, ErrorCode::transport_failure, e.what());
    r.answer = Answer{"", Choice{}, AnswerStage::without_clue};
  }
  r.timings.answer += since(t);
}

}  // namespace

QueryResult run_query(const Scene& scene, const AnswerSpace& space, const spl::BundleProvider& bundles,
                      ChatClient& client, const PipelineOptions& options) {
  options.agent.validate();
  options.limits.validate();
  QueryResult r;

  GeneratedProgram generated;
  auto t = Clock::now();
  try {
    generated = generate_program(scene, options.agent, client);
    r.codegen_requests = generated.requests;
    r.reasoning = generated.extracted.reasoning;
    r.program_text = generated.extracted.source.text;
  } catch (const Error& e) {
    r.timings.codegen = since(t);
    record_failure(r, FailureStage::program_generation, e.code(), e.what());
    fall_back(r, scene, space, client, options.agent);
    return r;
  } catch (const std::exception& e) {
    r.timings.codegen = since(t);
    record_failure(r, FailureStage::program_generation, ErrorCode::codegen_failed, e.what());
    fall_back(r, scene, space, client, options.agent);
    return r;
  }
  r.timings.codegen = since(t);

  double reconstruction_seconds = 0.0;
  const spl::BundleProvider timed = [&](const Scene& s) {
    const auto rt = Clock::now();
    struct Charge {
      double& total;
      Clock::time_point start;
      ~Charge() { total += since(start); }
    } charge{reconstruction_seconds, rt};
    if (!bundles) throw Error(ErrorCode::reconstruction_failed, "no reconstruction backend configured");
    return bundles(s);
  };
  t = Clock::now();
  try {
    r.output = spl::execute(generated.program, scene, timed, options.limits, options.tools);
    r.trace = r.output->trace;
  } catch (const spl::ProgramError& e) {
    r.trace = e.partial_trace();
    record_failure(r, execution_failure_stage(e.code()), e.code(), e.what());
  } catch (const Error& e) {
    record_failure(r, execution_failure_stage(e.code()), e.code(), e.what());
  } catch (const std::exception& e) {
    record_failure(r, FailureStage::execution, ErrorCode::tool_failure, e.what());
  }
  r.timings.execution = since(t);
  r.timings.reconstruction = reconstruction_seconds;
  if (r.failure) {
    fall_back(r, scene, space, client, options.agent);
    return r;
  }

  t = Clock::now();
  try {
    r.answer = answer_with_clue(scene, *r.output, generated.extracted.source, space, client, options.agent);
    r.timings.answer = since(t);
    return r;
  } catch (const Error& e) {
    record_failure(r, FailureStage::answer, e.code(), e.what());
  } catch (const std::exception& e) {
    record_failure(r, FailureStage::answer, ErrorCode::transport_failure, e.what());
  }
  r.timings.answer = since(t);
  fall_back(r, scene, space, client, options.agent);
  return r;
}

}  // namespace spatial::agent
