#pragma once

#include "spatial/agent/chat.hpp"
#include "spatial/scene.hpp"
#include "spatial/spl/ast.hpp"
#include "spatial/spl/interpreter.hpp"

#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace spatial::agent {

struct AgentConfig {
  std::string codegen_model = "gpt-4o";
  std::string answer_model = "gpt-4o";
  int example_count = 2;  // 0, 2 or 4
  int retry_budget = 2;   // re-prompts after a parse failure
  double temperature = 0.0;
  int max_tokens = 2048;
  bool structured_output = false;

  void validate() const;
};

enum class AnswerType { multiple_choice, yes_no, numeric_count, numeric_other, free_text };

std::string_view to_string(AnswerType type);
AnswerType parse_answer_type(std::string_view text);

struct AnswerSpace {
  AnswerType type = AnswerType::free_text;
  /// Ordered letter -> option text; empty for numeric and free-text queries.
  std::vector<std::pair<std::string, std::string>> options;

  bool numeric() const { return type == AnswerType::numeric_count || type == AnswerType::numeric_other; }
  bool has_letter(std::string_view letter) const;
};

struct Choice {
  enum class Kind { letter, number, text };
  Kind kind = Kind::text;
  std::string value;  // letter, "yes"/"no", free text, or the number as written
  double number = 0.0;

  /// A letter from the space for multiple choice, yes/no for yes/no, a number
  /// for numeric spaces; free text is always false except for free-text spaces.
  bool valid_for(const AnswerSpace& space) const;
};

/// The first rule that fires wins: a standalone option letter (all such
/// tokens agreeing), "answer is X", the longest option text quoted in the
/// reply, then for numeric spaces the first number in the last sentence that
/// has one. Anything else is free text.
Choice parse_choice(std::string_view text, const AnswerSpace& space);

enum class AnswerStage { with_clue, without_clue };
std::string_view to_string(AnswerStage stage);

struct Answer {
  std::string raw_text;
  Choice choice;
  AnswerStage stage = AnswerStage::with_clue;
};

struct ExtractedProgram {
  spl::ProgramSource source;
  std::string reasoning;  // text before the code block
};

/// Takes the first ```python block (or the first untagged block when none is
/// tagged) and removes its common indentation. A JSON object with a string
/// "code" field is accepted as structured output. Throws extraction_failed.
ExtractedProgram extract_program(const std::string& response_text);

struct GeneratedProgram {
  ExtractedProgram extracted;
  spl::Program program;
  int requests = 0;
};

/// Prompts for a program with the scene images attached, re-prompting with
/// the located error after an extraction or parse failure, up to the retry
/// budget. Throws codegen_failed once the budget is spent; client errors
/// propagate with their own codes.
GeneratedProgram generate_program(const Scene& scene, const AgentConfig& config, ChatClient& client);

/// Builds the answer request: the scene images, then any rendered evidence.
ChatRequest answer_request(const Scene& scene, const spl::ProgramOutput& output, const spl::ProgramSource& program,
                           const AgentConfig& config);

/// Throws choice_parse when the reply does not name a valid choice.
Answer answer_with_clue(const Scene& scene, const spl::ProgramOutput& output, const spl::ProgramSource& program,
                        const AnswerSpace& space, ChatClient& client, const AgentConfig& config);

/// Never throws choice_parse; an unparseable reply is kept as free text.
Answer answer_without_clue(const Scene& scene, const AnswerSpace& space, ChatClient& client,
                           const AgentConfig& config);

}  // namespace spatial::agent
