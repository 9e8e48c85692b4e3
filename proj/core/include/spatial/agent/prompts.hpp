#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace spatial::agent {

namespace prompts {

// Agent prompt strings, byte-for-byte. answer_background has the API text
// already substituted for its {api_specification} field.
extern const std::string_view task_description;
extern const std::string_view api_specification;
extern const std::string_view example_problems;  // Problem 1 and Problem 2
extern const std::string_view code_generation_prompt;
extern const std::string_view answer_background;
extern const std::string_view answer_prompt;
extern const std::string_view without_visual_clue_background;

/// Problems 3 and 4, used only when four in-context examples are requested.
extern const std::string_view extra_example_problems;

}  // namespace prompts

/// Number of in-context examples; only 0, 2 and 4 are accepted.
void validate_example_count(int count);

/// task_description + api_specification + examples + code_generation_prompt,
/// then the question. Pure function of its inputs.
std::string build_codegen_prompt(const std::string& question, int example_count);

}  // namespace spatial::agent
