#include "spatial/agent/agent.hpp"

#include "spatial/agent/prompts.hpp"
#include "spatial/error.hpp"
#include "spatial/spl/parser.hpp"

#include <json.hpp>

#include <algorithm>
#include <cctype>
#include <cstdlib>
#include <regex>
#include <sstream>

namespace spatial::agent {

void AgentConfig::validate() const {
  validate_example_count(example_count);
  if (retry_budget < 0) throw Error(ErrorCode::invalid_argument, "retry budget must be >= 0");
  if (!(temperature >= 0.0 && temperature <= 2.0)) {
    throw Error(ErrorCode::invalid_argument, "temperature must be in [0, 2]");
  }
  if (max_tokens <= 0) throw Error(ErrorCode::invalid_argument, "max_tokens must be positive");
  if (codegen_model.empty() || answer_model.empty()) throw Error(ErrorCode::invalid_argument, "model id is empty");
}

std::string_view to_string(AnswerType type) {
  switch (type) {
    case AnswerType::multiple_choice: return "multi-choice";
    case AnswerType::yes_no: return "yes/no";
    case AnswerType::numeric_count: return "numeric-count";
    case AnswerType::numeric_other: return "numeric-other";
    case AnswerType::free_text: return "free-text";
  }
  return "free-text";
}

AnswerType parse_answer_type(std::string_view text) {
  for (const auto t : {AnswerType::multiple_choice, AnswerType::yes_no, AnswerType::numeric_count,
                       AnswerType::numeric_other, AnswerType::free_text}) {
    if (text == to_string(t)) return t;
  }
  throw Error(ErrorCode::invalid_argument, "unknown answer type '" + std::string(text) + "'");
}

std::string_view to_string(AnswerStage stage) {
  return stage == AnswerStage::with_clue ? "with_clue" : "without_clue";
}

bool AnswerSpace::has_letter(std::string_view letter) const {
  return std::any_of(options.begin(), options.end(), [&](const auto& o) { return o.first == letter; });
}

bool Choice::valid_for(const AnswerSpace& space) const {
  switch (space.type) {
    case AnswerType::multiple_choice: return kind == Kind::letter && space.has_letter(value);
    case AnswerType::yes_no: return kind == Kind::text && (value == "yes" || value == "no");
    case AnswerType::numeric_count:
    case AnswerType::numeric_other: return kind == Kind::number;
    case AnswerType::free_text: return true;
  }
  return false;
}

namespace {

std::string lower(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(), [](unsigned char c) { return std::tolower(c); });
  return out;
}

bool is_word_char(char c) {
  return std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '\'';
}

Choice letter_choice(std::string letter) {
  return Choice{Choice::Kind::letter, std::move(letter), 0.0};
}

Choice number_choice(const std::string& written) {
  return Choice{Choice::Kind::number, written, std::strtod(written.c_str(), nullptr)};
}

Choice text_choice(std::string text) {
  return Choice{Choice::Kind::text, std::move(text), 0.0};
}

std::optional<Choice> standalone_letter(std::string_view text, const AnswerSpace& space) {
  std::optional<std::string> found;
  for (std::size_t i = 0; i < text.size(); ++i) {
    const char c = text[i];
    if (c < 'A' || c > 'Z') continue;
    if (i > 0 && is_word_char(text[i - 1])) continue;
    if (i + 1 < text.size() && is_word_char(text[i + 1])) continue;
    const std::string letter(1, c);
    if (!space.has_letter(letter)) continue;
    if (found && *found != letter) return std::nullopt;
    found = letter;
  }
  if (!found) return std::nullopt;
  return letter_choice(*found);
}

std::vector<std::string> words(std::string_view text) {
  std::vector<std::string> out;
  std::string cur;
  for (const char c : text) {
    if (std::isalnum(static_cast<unsigned char>(c))) {
      cur += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    } else if (!cur.empty()) {
      out.push_back(std::move(cur));
      cur.clear();
    }
  }
  if (!cur.empty()) out.push_back(std::move(cur));
  return out;
}

const std::regex& number_pattern() {
  static const std::regex re(R"((?:^|[^\w.])(-?\d+(?:\.\d+)?))");
  return re;
}

std::optional<Choice> answer_is(std::string_view text, const AnswerSpace& space) {
  static const std::regex re(R"(answer\s*(?:is|would be|will be|should be|:|=)\s*:?\s*(?:option\s+)?[\(\[\*"']*(-?\d+(?:\.\d+)?|[A-Za-z]+))",
                             std::regex::icase);
  const std::string s(text);
  for (auto it = std::sregex_iterator(s.begin(), s.end(), re); it != std::sregex_iterator(); ++it) {
    const std::string token = (*it)[1].str();
    switch (space.type) {
      case AnswerType::multiple_choice:
        if (token.size() == 1 && space.has_letter(std::string(1, static_cast<char>(std::toupper(token[0]))))) {
          return letter_choice(std::string(1, static_cast<char>(std::toupper(token[0]))));
        }
        break;
      case AnswerType::yes_no:
        if (lower(token) == "yes" || lower(token) == "no") return text_choice(lower(token));
        break;
      case AnswerType::numeric_count:
      case AnswerType::numeric_other:
        if (std::isdigit(static_cast<unsigned char>(token.back()))) return number_choice(token);
        break;
      case AnswerType::free_text: break;
    }
  }
  return std::nullopt;
}

std::optional<Choice> option_text(std::string_view text, const AnswerSpace& space) {
  const std::string haystack = lower(text);
  if (space.type == AnswerType::yes_no) {
    const auto w = words(text);
    const bool yes = std::find(w.begin(), w.end(), "yes") != w.end();
    const bool no = std::find(w.begin(), w.end(), "no") != w.end();
    if (yes != no) return text_choice(yes ? "yes" : "no");
    return std::nullopt;
  }
  const std::pair<std::string, std::string>* best = nullptr;
  for (const auto& opt : space.options) {
    const std::string needle = lower(opt.second);
    if (needle.empty() || haystack.find(needle) == std::string::npos) continue;
    if (!best || opt.second.size() > best->second.size()) best = &opt;
  }
  if (!best) return std::nullopt;
  return letter_choice(best->first);
}

std::optional<Choice> tail_number(std::string_view text) {
  std::vector<std::string> sentences;
  std::string cur;
  for (std::size_t i = 0; i < text.size(); ++i) {
    const char c = text[i];
    const bool end = c == '\n' || ((c == '.' || c == '!' || c == '?') &&
                                   (i + 1 == text.size() || std::isspace(static_cast<unsigned char>(text[i + 1]))));
    if (end) {
      sentences.push_back(std::move(cur));
      cur.clear();
    } else {
      cur += c;
    }
  }
  sentences.push_back(std::move(cur));
  for (auto it = sentences.rbegin(); it != sentences.rend(); ++it) {
    std::smatch m;
    if (std::regex_search(*it, m, number_pattern())) return number_choice(m[1].str());
  }
  return std::nullopt;
}

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return "";
  const auto e = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(b, e - b + 1));
}

}  // namespace

Choice parse_choice(std::string_view text, const AnswerSpace& space) {
  if (space.type == AnswerType::multiple_choice) {
    if (auto c = standalone_letter(text, space)) return *c;
  }
  if (space.type != AnswerType::free_text) {
    if (auto c = answer_is(text, space)) return *c;
  }
  if (space.type == AnswerType::multiple_choice || space.type == AnswerType::yes_no) {
    if (auto c = option_text(text, space)) return *c;
  }
  if (space.numeric()) {
    if (auto c = tail_number(text)) return *c;
  }
  return text_choice(trim(text));
}

namespace {

std::string dedent(const std::vector<std::string>& lines) {
  std::size_t common = std::string::npos;
  for (const auto& l : lines) {
    const auto first = l.find_first_not_of(" \t");
    if (first == std::string::npos) continue;
    common = std::min(common, first);
  }
  if (common == std::string::npos) common = 0;
  std::string out;
  for (const auto& l : lines) {
    out += l.size() >= common ? l.substr(common) : std::string();
    out += '\n';
  }
  return out;
}

struct Fence {
  std::size_t open_line;
  std::string info;
  std::vector<std::string> body;
  bool closed = false;
};

std::vector<Fence> fences(const std::vector<std::string>& lines) {
  std::vector<Fence> out;
  std::optional<Fence> cur;
  for (std::size_t i = 0; i < lines.size(); ++i) {
    const std::string t = trim(lines[i]);
    const bool fence = t.rfind("```", 0) == 0;
    if (cur) {
      if (fence && trim(t.substr(3)).empty()) {
        cur->closed = true;
        out.push_back(std::move(*cur));
        cur.reset();
      } else {
        cur->body.push_back(lines[i]);
      }
    } else if (fence) {
      cur = Fence{i, lower(trim(t.substr(3))), {}, false};
    }
  }
  if (cur) out.push_back(std::move(*cur));
  return out;
}

std::vector<std::string> split_lines(const std::string& text) {
  std::vector<std::string> lines;
  std::string line;
  std::istringstream in(text);
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    lines.push_back(line);
  }
  return lines;
}

ExtractedProgram from_fences(const std::string& text, std::string reasoning_prefix) {
  const auto lines = split_lines(text);
  const auto blocks = fences(lines);
  const Fence* chosen = nullptr;
  for (const auto& f : blocks) {
    if (f.info == "python" || f.info == "py" || f.info == "python3") {
      chosen = &f;
      break;
    }
  }
  if (!chosen) {
    for (const auto& f : blocks) {
      if (f.info.empty()) {
        chosen = &f;
        break;
      }
    }
  }
  if (!chosen) throw Error(ErrorCode::extraction_failed, "response contains no ```python code block");
  std::string reasoning = std::move(reasoning_prefix);
  for (std::size_t i = 0; i < chosen->open_line; ++i) {
    reasoning += lines[i];
    reasoning += '\n';
  }
  ExtractedProgram out;
  out.source.text = dedent(chosen->body);
  out.source.origin = spl::SourceOrigin::agent;
  out.reasoning = trim(reasoning);
  if (trim(out.source.text).empty()) throw Error(ErrorCode::extraction_failed, "code block is empty");
  return out;
}

}  // namespace

ExtractedProgram extract_program(const std::string& response_text) {
  const std::string t = trim(response_text);
  if (!t.empty() && t.front() == '{') {
    const auto j = nlohmann::json::parse(t, nullptr, false);
    if (j.is_object() && j.contains("code") && j["code"].is_string()) {
      const std::string code = j["code"].get<std::string>();
      const std::string reasoning = j.contains("reasoning") && j["reasoning"].is_string()
                                        ? j["reasoning"].get<std::string>()
                                        : std::string();
      if (code.find("```") != std::string::npos) return from_fences(code, reasoning + "\n");
      ExtractedProgram out;
      out.source.text = dedent(split_lines(code));
      out.source.origin = spl::SourceOrigin::agent;
      out.reasoning = trim(reasoning);
      if (trim(out.source.text).empty()) throw Error(ErrorCode::extraction_failed, "structured code field is empty");
      return out;
    }
  }
  return from_fences(response_text, "");
}

namespace {

ChatMessage user_message(std::string text, const std::vector<std::shared_ptr<const Image>>& images) {
  ChatMessage m;
  m.role = "user";
  m.parts.push_back(ContentPart::from_text(std::move(text)));
  for (const auto& img : images) m.parts.push_back(ContentPart::from_image(img));
  return m;
}

}  // namespace

GeneratedProgram generate_program(const Scene& scene, const AgentConfig& config, ChatClient& client) {
  config.validate();
  ChatRequest request;
  request.model = config.codegen_model;
  request.temperature = config.temperature;
  request.max_tokens = config.max_tokens;
  request.structured_output = config.structured_output;
  request.messages.push_back(user_message(build_codegen_prompt(scene.question, config.example_count), scene.images));

  GeneratedProgram out;
  std::string last_error;
  for (int attempt = 0; attempt <= config.retry_budget; ++attempt) {
    const ChatResponse response = client.send(request);
    ++out.requests;
    try {
      out.extracted = extract_program(response.text);
      out.program = spl::parse_program(out.extracted.source);
      return out;
    } catch (const Error& e) {
      last_error = std::string(to_string(e.code())) + ": " + e.what();
    }
    ChatMessage reply;
    reply.role = "assistant";
    reply.parts.push_back(ContentPart::from_text(response.text));
    request.messages.push_back(std::move(reply));
    request.messages.push_back(user_message(
        "The program could not be used (" + last_error +
            "). Write the corrected complete program in a ```python block, with the function named program.",
        {}));
  }
  throw Error(ErrorCode::codegen_failed, "no usable program after " + std::to_string(out.requests) +
                                             " request(s); last error: " + last_error);
}

ChatRequest answer_request(const Scene& scene, const spl::ProgramOutput& output, const spl::ProgramSource& program,
                           const AgentConfig& config) {
  std::string text(prompts::answer_background);
  text += "\nQuestion: " + scene.question + "\n";
  text += "\nProgram:\n```python\n" + program.text;
  if (!program.text.empty() && program.text.back() != '\n') text += '\n';
  text += "```\n";
  std::vector<std::shared_ptr<const Image>> images = scene.images;
  if (output.kind == spl::OutputKind::text) {
    text += "\nExecution output:\n" + output.text + "\n";
  } else {
    text += "\nExecution output: " + std::to_string(output.images.size()) +
            " rendered image(s), attached after the " + std::to_string(scene.images.size()) + " input image(s).\n";
    for (const auto& img : output.images) images.push_back(std::make_shared<const Image>(img));
  }
  text += prompts::answer_prompt;
  ChatRequest request;
  request.model = config.answer_model;
  request.temperature = config.temperature;
  request.max_tokens = config.max_tokens;
  request.messages.push_back(user_message(std::move(text), images));
  return request;
}

Answer answer_with_clue(const Scene& scene, const spl::ProgramOutput& output, const spl::ProgramSource& program,
                        const AnswerSpace& space, ChatClient& client, const AgentConfig& config) {
  const ChatResponse response = client.send(answer_request(scene, output, program, config));
  Answer a{response.text, parse_choice(response.text, space), AnswerStage::with_clue};
  if (!a.choice.valid_for(space)) {
    throw Error(ErrorCode::choice_parse, "no " + std::string(to_string(space.type)) + " answer in reply: " +
                                             trim(response.text).substr(0, 120));
  }
  return a;
}

Answer answer_without_clue(const Scene& scene, const AnswerSpace& space, ChatClient& client,
                           const AgentConfig& config) {
  ChatRequest request;
  request.model = config.answer_model;
  request.temperature = config.temperature;
  request.max_tokens = config.max_tokens;
  request.messages.push_back(user_message(
      std::string(prompts::without_visual_clue_background) + "\nQuestion: " + scene.question + "\n", scene.images));
  const ChatResponse response = client.send(request);
  return Answer{response.text, parse_choice(response.text, space), AnswerStage::without_clue};
}

}  // namespace spatial::agent
