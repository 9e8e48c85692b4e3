#include "spatial/bench/bench.hpp"

#include "spatial/error.hpp"

#include <json.hpp>

#include <algorithm>
#include <atomic>
#include <cctype>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <mutex>
#include <regex>
#include <set>
#include <sstream>
#include <thread>

namespace spatial::bench {

using nlohmann::json;

std::string_view to_string(Category c) {
  switch (c) {
    case Category::rotation: return "rotation";
    case Category::among: return "among";
    case Category::around: return "around";
    case Category::other: return "other";
  }
  return "other";
}

namespace {

std::string lower(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(), [](unsigned char c) { return std::tolower(c); });
  return out;
}

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return "";
  const auto e = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(b, e - b + 1));
}

}  // namespace

Category category_from_text(std::string_view text) {
  const std::string t = lower(text);
  if (t.find("rotation") != std::string::npos) return Category::rotation;
  if (t.find("among") != std::string::npos) return Category::among;
  if (t.find("around") != std::string::npos) return Category::around;
  return Category::other;
}

std::string_view to_string(DatasetFormat f) {
  return f == DatasetFormat::mindcube ? "mindcube" : "omni3d";
}

DatasetFormat parse_dataset_format(std::string_view text) {
  if (text == "mindcube") return DatasetFormat::mindcube;
  if (text == "omni3d") return DatasetFormat::omni3d;
  throw Error(ErrorCode::invalid_argument, "unknown dataset format '" + std::string(text) + "'");
}

FieldMap FieldMap::defaults(DatasetFormat format) {
  FieldMap m;
  if (format == DatasetFormat::omni3d) {
    m.category = "category";
    m.answer = "answer";
  }
  return m;
}

void FieldMap::apply(const std::vector<std::string>& overrides) {
  for (const auto& o : overrides) {
    const auto eq = o.find('=');
    if (eq == std::string::npos || eq == 0 || eq + 1 == o.size()) {
      throw Error(ErrorCode::invalid_argument, "field override '" + o + "' must look like field=key");
    }
    const std::string field = o.substr(0, eq);
    const std::string key = o.substr(eq + 1);
    std::string* slot = field == "id"            ? &id
                        : field == "question"    ? &question
                        : field == "images"      ? &images
                        : field == "category"    ? &category
                        : field == "answer"      ? &answer
                        : field == "answer_type" ? &answer_type
                        : field == "options"     ? &options
                                                 : nullptr;
    if (!slot) throw Error(ErrorCode::invalid_argument, "unknown dataset field '" + field + "'");
    *slot = key;
  }
}

namespace {

using Options = std::vector<std::pair<std::string, std::string>>;

bool options_from_lines(const std::string& question, std::string& stem, Options& options) {
  static const std::regex option_line(R"(^\s*([A-Z])[.)]\s+(.*\S)\s*$)");
  std::istringstream in(question);
  std::string line;
  std::vector<std::string> before;
  Options found;
  bool started = false;
  bool ended = false;
  while (std::getline(in, line)) {
    std::smatch m;
    const bool is_option = std::regex_match(line, m, option_line);
    if (is_option && !ended && m[1].str()[0] == static_cast<char>('A' + found.size())) {
      started = true;
      found.emplace_back(m[1].str(), m[2].str());
    } else if (started) {
      ended = true;
    } else {
      before.push_back(line);
    }
  }
  if (found.size() < 2) return false;
  stem.clear();
  for (const auto& b : before) stem += (stem.empty() ? "" : "\n") + b;
  stem = trim(stem);
  options = std::move(found);
  return true;
}

bool options_inline(const std::string& question, std::string& stem, Options& options) {
  std::vector<std::size_t> marks;
  std::size_t from = 0;
  for (char letter = 'A'; letter <= 'Z'; ++letter) {
    const std::string marker = std::string(1, letter) + ". ";
    std::size_t pos = question.find(marker, from);
    while (pos != std::string::npos && pos > 0 && !std::isspace(static_cast<unsigned char>(question[pos - 1]))) {
      pos = question.find(marker, pos + 1);
    }
    if (pos == std::string::npos) break;
    marks.push_back(pos);
    from = pos + marker.size();
  }
  if (marks.size() < 2) return false;
  Options found;
  for (std::size_t i = 0; i < marks.size(); ++i) {
    const std::size_t start = marks[i] + 3;
    const std::size_t end = i + 1 < marks.size() ? marks[i + 1] : question.size();
    const std::string text = trim(question.substr(start, end - start));
    if (text.empty()) return false;
    found.emplace_back(std::string(1, static_cast<char>('A' + i)), text);
  }
  stem = trim(question.substr(0, marks[0]));
  options = std::move(found);
  return true;
}

}  // namespace

std::pair<std::string, Options> split_options(const std::string& question) {
  std::string stem;
  Options options;
  if (options_from_lines(question, stem, options) || options_inline(question, stem, options)) {
    return {stem, options};
  }
  return {trim(question), {}};
}

namespace {

class RecordError : public Error {
 public:
  RecordError(const std::filesystem::path& path, int line, const std::string& message)
      : Error(ErrorCode::dataset_parse, path.string() + ":" + std::to_string(line) + ": " + message) {}
};

std::string text_field(const json& record, const std::string& key, const std::filesystem::path& path, int line) {
  if (!record.contains(key)) throw RecordError(path, line, "missing field '" + key + "'");
  const json& v = record[key];
  if (v.is_string()) return v.get<std::string>();
  if (v.is_number_integer()) return std::to_string(v.get<long long>());
  throw RecordError(path, line, "field '" + key + "' must be a string");
}

std::vector<std::filesystem::path> image_field(const json& record, const std::string& key,
                                               const std::filesystem::path& images_root,
                                               const std::filesystem::path& path, int line) {
  if (!record.contains(key)) throw RecordError(path, line, "missing field '" + key + "'");
  std::vector<std::string> names;
  const json& v = record[key];
  if (v.is_string()) {
    names.push_back(v.get<std::string>());
  } else if (v.is_array() && !v.empty() && std::all_of(v.begin(), v.end(), [](const json& x) { return x.is_string(); })) {
    for (const auto& x : v) names.push_back(x.get<std::string>());
  } else {
    throw RecordError(path, line, "field '" + key + "' must be a path or a non-empty list of paths");
  }
  std::vector<std::filesystem::path> out;
  for (const auto& n : names) {
    std::filesystem::path p(n);
    if (p.is_relative()) p = images_root / p;
    if (!std::filesystem::is_regular_file(p)) {
      throw Error(ErrorCode::missing_image,
                  path.string() + ":" + std::to_string(line) + ": image not found: " + p.string());
    }
    out.push_back(p);
  }
  return out;
}

std::string category_text(const json& record, const std::string& key) {
  if (!record.contains(key)) return "";
  const json& v = record[key];
  if (v.is_string()) return v.get<std::string>();
  std::string out;
  if (v.is_array()) {
    for (const auto& x : v) {
      if (x.is_string()) out += x.get<std::string>() + " ";
    }
  }
  return out;
}

std::optional<std::string> letter_of(const std::string& answer) {
  static const std::regex re(R"(^\s*\(?([A-Za-z])\)?(?:[.:]|\s|$))");
  std::smatch m;
  if (!std::regex_search(answer, m, re)) return std::nullopt;
  return std::string(1, static_cast<char>(std::toupper(m[1].str()[0])));
}

double number_of(const json& v, const std::filesystem::path& path, int line) {
  double x = 0.0;
  if (v.is_number()) {
    x = v.get<double>();
  } else if (v.is_string()) {
    const std::string s = trim(v.get<std::string>());
    char* end = nullptr;
    x = std::strtod(s.c_str(), &end);
    if (s.empty() || end != s.c_str() + s.size()) throw RecordError(path, line, "answer '" + s + "' is not a number");
  } else {
    throw RecordError(path, line, "numeric answer must be a number");
  }
  if (!std::isfinite(x)) throw RecordError(path, line, "numeric answer is not finite");
  return x;
}

std::string written(const json& v) {
  return v.is_string() ? trim(v.get<std::string>()) : v.dump();
}

void multiple_choice(BenchItem& item, const std::string& answer, const std::filesystem::path& path, int line) {
  if (item.space.options.empty()) {
    item.space.type = agent::AnswerType::free_text;
    item.truth = trim(answer);
    return;
  }
  item.space.type = agent::AnswerType::multiple_choice;
  const auto letter = letter_of(answer);
  if (!letter || !item.space.has_letter(*letter)) {
    throw RecordError(path, line, "ground truth '" + answer + "' is not one of the options");
  }
  item.truth = *letter;
}

BenchItem parse_record(const json& record, DatasetFormat format, const std::filesystem::path& images_root,
                       const FieldMap& fields, const std::filesystem::path& path, int line) {
  if (!record.is_object()) throw RecordError(path, line, "record is not a JSON object");
  BenchItem item;
  item.id = text_field(record, fields.id, path, line);
  item.question = text_field(record, fields.question, path, line);
  item.category = category_from_text(category_text(record, fields.category));
  if (!record.contains(fields.answer)) throw RecordError(path, line, "missing field '" + fields.answer + "'");
  const json& answer = record[fields.answer];

  if (format == DatasetFormat::mindcube) {
    if (!answer.is_string()) throw RecordError(path, line, "field '" + fields.answer + "' must be a string");
    item.space.options = split_options(item.question).second;
    multiple_choice(item, answer.get<std::string>(), path, line);
  } else {
    const std::string type = lower(text_field(record, fields.answer_type, path, line));
    if (type == "int" || type == "count" || type == "numeric-count") {
      item.space.type = agent::AnswerType::numeric_count;
      item.truth_number = number_of(answer, path, line);
      if (*item.truth_number != std::floor(*item.truth_number)) {
        throw RecordError(path, line, "count answer must be an integer");
      }
      item.truth = written(answer);
    } else if (type == "float" || type == "numeric" || type == "numeric-other") {
      item.space.type = agent::AnswerType::numeric_other;
      item.truth_number = number_of(answer, path, line);
      item.truth = written(answer);
    } else if (type == "str" || type == "bool" || type == "yes/no" || type == "yes_no") {
      const std::string a = lower(written(answer));
      if (a != "yes" && a != "no") throw RecordError(path, line, "yes/no answer must be yes or no");
      item.space.type = agent::AnswerType::yes_no;
      item.truth = a;
    } else if (type == "mc" || type == "multi-choice" || type == "multiple_choice") {
      if (record.contains(fields.options)) {
        const json& o = record[fields.options];
        if (o.is_object()) {
          for (const auto& [k, v] : o.items()) {
            if (!v.is_string()) throw RecordError(path, line, "option texts must be strings");
            item.space.options.emplace_back(k, v.get<std::string>());
          }
        } else if (o.is_array()) {
          for (std::size_t i = 0; i < o.size(); ++i) {
            if (!o[i].is_string()) throw RecordError(path, line, "option texts must be strings");
            item.space.options.emplace_back(std::string(1, static_cast<char>('A' + i)), o[i].get<std::string>());
          }
        } else {
          throw RecordError(path, line, "field '" + fields.options + "' must be an object or a list");
        }
      } else {
        item.space.options = split_options(item.question).second;
      }
      if (!answer.is_string()) throw RecordError(path, line, "multiple-choice answer must be a string");
      multiple_choice(item, answer.get<std::string>(), path, line);
    } else {
      throw RecordError(path, line, "unknown answer type '" + type + "'");
    }
  }
  item.image_paths = image_field(record, fields.images, images_root, path, line);
  return item;
}

}  // namespace

std::vector<BenchItem> load_dataset(const std::filesystem::path& path, DatasetFormat format,
                                    const std::filesystem::path& images_root, const FieldMap& fields) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::missing_file, "cannot open dataset " + path.string());
  std::vector<BenchItem> items;
  std::set<std::string> ids;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    json record;
    try {
      record = json::parse(line);
    } catch (const json::exception& e) {
      throw RecordError(path, line_no, std::string("invalid JSON: ") + e.what());
    }
    BenchItem item = parse_record(record, format, images_root, fields, path, line_no);
    if (!ids.insert(item.id).second) throw RecordError(path, line_no, "duplicate id '" + item.id + "'");
    items.push_back(std::move(item));
  }
  return items;
}

std::vector<BenchItem> load_dataset(const std::filesystem::path& path, DatasetFormat format,
                                    const std::filesystem::path& images_root) {
  return load_dataset(path, format, images_root, FieldMap::defaults(format));
}

double score_mra(double prediction, double truth) {
  if (!std::isfinite(truth) || truth == 0.0) {
    throw Error(ErrorCode::invalid_argument, "relative accuracy is undefined for a zero or non-finite truth");
  }
  if (!std::isfinite(prediction)) return 0.0;
  const double err = std::abs(prediction - truth) * 100.0;
  int satisfied = 0;
  for (const int theta : kMraThresholdsPercent) satisfied += err < (100 - theta) * std::abs(truth);
  return satisfied / 10.0;
}

std::optional<double> score_item(const BenchItem& item, const BenchResult& result) {
  const agent::Choice& p = result.prediction;
  switch (item.space.type) {
    case agent::AnswerType::multiple_choice:
      return p.kind == agent::Choice::Kind::letter && p.value == item.truth ? 1.0 : 0.0;
    case agent::AnswerType::yes_no:
      return lower(p.value) == item.truth ? 1.0 : 0.0;
    case agent::AnswerType::numeric_count:
      return p.kind == agent::Choice::Kind::number && p.number == *item.truth_number ? 1.0 : 0.0;
    case agent::AnswerType::numeric_other:
      if (*item.truth_number == 0.0) return std::nullopt;
      return p.kind == agent::Choice::Kind::number ? score_mra(p.number, *item.truth_number) : 0.0;
    case agent::AnswerType::free_text:
      return !trim(p.value).empty() && lower(trim(p.value)) == lower(item.truth) ? 1.0 : 0.0;
  }
  return 0.0;
}

AccuracyScores score_accuracy(const std::vector<BenchResult>& results, const std::vector<BenchItem>& items) {
  if (results.size() != items.size()) {
    throw Error(ErrorCode::length_mismatch, std::to_string(results.size()) + " results for " +
                                                std::to_string(items.size()) + " items");
  }
  AccuracyScores out;
  std::map<Category, double> sums;
  double total = 0.0;
  for (std::size_t i = 0; i < items.size(); ++i) {
    if (results[i].id != items[i].id) {
      throw Error(ErrorCode::length_mismatch,
                  "result " + std::to_string(i) + " is for '" + results[i].id + "', item is '" + items[i].id + "'");
    }
    const auto s = score_item(items[i], results[i]);
    if (!s) {
      out.excluded.push_back(items[i].id);
      continue;
    }
    total += *s;
    ++out.items;
    sums[items[i].category] += *s;
    ++out.per_category[items[i].category].items;
  }
  out.overall = out.items ? total / static_cast<double>(out.items) : 0.0;
  for (auto& [c, score] : out.per_category) score.accuracy = sums[c] / static_cast<double>(score.items);
  return out;
}

BenchReport make_report(const std::vector<BenchResult>& results, const std::vector<BenchItem>& items) {
  std::map<std::string, const BenchResult*> by_id;
  for (const auto& r : results) by_id.emplace(r.id, &r);
  std::vector<BenchResult> aligned;
  std::vector<BenchItem> present;
  for (const auto& item : items) {
    const auto it = by_id.find(item.id);
    if (it == by_id.end()) continue;
    aligned.push_back(*it->second);
    present.push_back(item);
  }
  BenchReport report;
  report.accuracy = score_accuracy(aligned, present);
  double mra_sum = 0.0;
  for (std::size_t i = 0; i < present.size(); ++i) {
    const auto& r = aligned[i];
    if (present[i].space.type == agent::AnswerType::numeric_other) {
      if (const auto s = score_item(present[i], r)) {
        mra_sum += *s;
        ++report.mra_items;
      }
    }
    if (r.failure) {
      ++report.failures[*r.failure];
      ++report.failure_total;
    }
    report.mean_timings.codegen += r.timings.codegen;
    report.mean_timings.execution += r.timings.execution;
    report.mean_timings.reconstruction += r.timings.reconstruction;
    report.mean_timings.answer += r.timings.answer;
  }
  if (report.mra_items) report.mra = mra_sum / static_cast<double>(report.mra_items);
  if (!aligned.empty()) {
    const double n = static_cast<double>(aligned.size());
    report.mean_timings.codegen /= n;
    report.mean_timings.execution /= n;
    report.mean_timings.reconstruction /= n;
    report.mean_timings.answer /= n;
  }
  return report;
}

namespace {

json timings_json(const agent::StageTimings& t) {
  return {{"codegen", t.codegen}, {"execution", t.execution}, {"reconstruction", t.reconstruction},
          {"answer", t.answer}};
}

agent::StageTimings timings_from(const json& j) {
  agent::StageTimings t;
  t.codegen = j.value("codegen", 0.0);
  t.execution = j.value("execution", 0.0);
  t.reconstruction = j.value("reconstruction", 0.0);
  t.answer = j.value("answer", 0.0);
  return t;
}

std::string_view kind_name(agent::Choice::Kind k) {
  switch (k) {
    case agent::Choice::Kind::letter: return "letter";
    case agent::Choice::Kind::number: return "number";
    case agent::Choice::Kind::text: return "text";
  }
  return "text";
}

agent::Choice::Kind kind_from(const std::string& s) {
  if (s == "letter") return agent::Choice::Kind::letter;
  if (s == "number") return agent::Choice::Kind::number;
  if (s == "text") return agent::Choice::Kind::text;
  throw Error(ErrorCode::dataset_parse, "unknown prediction kind '" + s + "'");
}

}  // namespace

std::string report_to_json(const BenchReport& report, bool include_timings) {
  json per_category = json::object();
  for (const auto& [c, s] : report.accuracy.per_category) {
    per_category[std::string(to_string(c))] = {{"accuracy", s.accuracy}, {"items", s.items}};
  }
  json failures = json::object();
  for (const auto& [stage, n] : report.failures) failures[std::string(agent::to_string(stage))] = n;
  json thresholds = json::array();
  for (const int t : kMraThresholdsPercent) thresholds.push_back(t / 100.0);
  json j = {{"mra_thresholds", thresholds},
            {"items", report.accuracy.items},
            {"overall", report.accuracy.overall},
            {"per_category", per_category},
            {"excluded", report.accuracy.excluded},
            {"mra", report.mra ? json(*report.mra) : json(nullptr)},
            {"mra_items", report.mra_items},
            {"failures", failures},
            {"failure_total", report.failure_total}};
  if (include_timings) {
    j["mean_timings"] = timings_json(report.mean_timings);
    j["wall_clock_seconds"] = report.wall_clock_seconds;
  }
  return j.dump(2) + "\n";
}

std::string report_table(const BenchReport& report) {
  auto cell = [&](std::optional<Category> c) {
    double v = report.accuracy.overall;
    if (c) {
      const auto it = report.accuracy.per_category.find(*c);
      if (it == report.accuracy.per_category.end()) return std::string("-");
      v = it->second.accuracy;
    }
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.2f", 100.0 * v);
    return std::string(buf);
  };
  char line[256];
  std::string out;
  std::snprintf(line, sizeof(line), "%-10s %-10s %-10s %-10s\n", "Overall", "Rotation", "Among", "Around");
  out += line;
  std::snprintf(line, sizeof(line), "%-10s %-10s %-10s %-10s\n", cell(std::nullopt).c_str(),
                cell(Category::rotation).c_str(), cell(Category::among).c_str(), cell(Category::around).c_str());
  out += line;
  out += "\nitems scored: " + std::to_string(report.accuracy.items);
  if (!report.accuracy.excluded.empty()) out += " (" + std::to_string(report.accuracy.excluded.size()) + " excluded)";
  out += '\n';
  if (report.mra) {
    std::snprintf(line, sizeof(line), "MRA (numeric-other, %zu items): %.4f\n", report.mra_items, *report.mra);
    out += line;
  }
  out += "failures: " + std::to_string(report.failure_total);
  for (const auto& [stage, n] : report.failures) {
    out += "  " + std::string(agent::to_string(stage)) + "=" + std::to_string(n);
  }
  out += '\n';
  const auto& t = report.mean_timings;
  std::snprintf(line, sizeof(line), "mean seconds: codegen %.3f  execution %.3f  answer %.3f  (wall clock %.2f)\n",
                t.codegen, t.execution, t.answer, report.wall_clock_seconds);
  out += line;
  return out;
}

std::string result_to_json(const BenchResult& r) {
  const json j = {{"id", r.id},
                  {"prediction",
                   {{"kind", kind_name(r.prediction.kind)},
                    {"value", r.prediction.value},
                    {"number", r.prediction.number}}},
                  {"answer_stage", agent::to_string(r.answer_stage)},
                  {"failure", r.failure ? json(agent::to_string(*r.failure)) : json(nullptr)},
                  {"failure_code", r.failure_code},
                  {"failure_message", r.failure_message},
                  {"timings", timings_json(r.timings)},
                  {"program", r.program_text}};
  return j.dump();
}

BenchResult result_from_json(const std::string& line) {
  try {
    const json j = json::parse(line);
    BenchResult r;
    r.id = j.at("id").get<std::string>();
    const json& p = j.at("prediction");
    r.prediction.kind = kind_from(p.at("kind").get<std::string>());
    r.prediction.value = p.at("value").get<std::string>();
    r.prediction.number = p.at("number").get<double>();
    r.answer_stage = j.at("answer_stage").get<std::string>() == "without_clue" ? agent::AnswerStage::without_clue
                                                                               : agent::AnswerStage::with_clue;
    if (!j.at("failure").is_null()) r.failure = agent::parse_failure_stage(j["failure"].get<std::string>());
    r.failure_code = j.value("failure_code", "");
    r.failure_message = j.value("failure_message", "");
    r.timings = timings_from(j.value("timings", json::object()));
    r.program_text = j.value("program", "");
    return r;
  } catch (const json::exception& e) {
    throw Error(ErrorCode::dataset_parse, std::string("bad result record: ") + e.what());
  }
}

std::vector<BenchResult> read_results(const std::filesystem::path& path) {
  std::vector<BenchResult> out;
  std::ifstream in(path);
  if (!in) return out;
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) {
    if (!trim(line).empty()) lines.push_back(line);
  }
  std::set<std::string> seen;
  for (std::size_t i = 0; i < lines.size(); ++i) {
    BenchResult r;
    try {
      r = result_from_json(lines[i]);
    } catch (const Error& e) {
      if (i + 1 == lines.size()) break;  // torn write from an interrupted run
      throw Error(ErrorCode::dataset_parse, path.string() + ":" + std::to_string(i + 1) + ": " + e.what());
    }
    if (seen.insert(r.id).second) out.push_back(std::move(r));
  }
  return out;
}

BenchResult run_item(const BenchItem& item, const BenchPipeline& pipeline) {
  BenchResult r;
  r.id = item.id;
  Scene scene;
  try {
    scene = Scene::load(item.question, item.image_paths);
  } catch (const Error& e) {
    r.failure = agent::FailureStage::reconstruction;
    r.failure_code = std::string(to_string(e.code()));
    r.failure_message = e.what();
    r.answer_stage = agent::AnswerStage::without_clue;
    return r;
  }
  spl::BundleProvider provider;
  if (pipeline.bundles) provider = [&](const Scene&) { return pipeline.bundles(item); };
  const agent::QueryResult q = agent::run_query(scene, item.space, provider, *pipeline.client, pipeline.options);
  r.prediction = q.answer.choice;
  r.answer_stage = q.answer.stage;
  r.failure = q.failure;
  if (q.failure_code) r.failure_code = std::string(to_string(*q.failure_code));
  r.failure_message = q.failure_message;
  r.timings = q.timings;
  r.program_text = q.program_text;
  return r;
}

BenchReport run_bench(const std::vector<BenchItem>& items, const BenchPipeline& pipeline,
                      const RunOptions& options) {
  if (!pipeline.client) throw Error(ErrorCode::invalid_argument, "bench pipeline has no chat client");
  if (options.parallelism == 0) throw Error(ErrorCode::invalid_argument, "parallelism must be at least 1");
  if (options.results_path.empty()) throw Error(ErrorCode::invalid_argument, "results log path is empty");
  pipeline.options.agent.validate();
  pipeline.options.limits.validate();
  const auto started = std::chrono::steady_clock::now();

  std::vector<BenchResult> results = options.resume ? read_results(options.results_path) : std::vector<BenchResult>{};
  if (options.results_path.has_parent_path()) std::filesystem::create_directories(options.results_path.parent_path());
  {
    // rewrite canonically so a torn final line cannot merge with new appends
    std::ofstream out(options.results_path, std::ios::trunc);
    if (!out) throw Error(ErrorCode::io_error, "cannot write " + options.results_path.string());
    for (const auto& r : results) out << result_to_json(r) << '\n';
  }
  std::set<std::string> done;
  for (const auto& r : results) done.insert(r.id);
  std::vector<const BenchItem*> todo;
  for (const auto& item : items) {
    if (!done.count(item.id)) todo.push_back(&item);
  }
  if (options.limit && todo.size() > *options.limit) todo.resize(*options.limit);

  std::ofstream log(options.results_path, std::ios::app);
  if (!log) throw Error(ErrorCode::io_error, "cannot append to " + options.results_path.string());
  std::mutex writer;
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < todo.size(); i = next++) {
      BenchResult r;
      try {
        r = run_item(*todo[i], pipeline);
      } catch (const std::exception& e) {
        r.id = todo[i]->id;
        r.failure = agent::FailureStage::execution;
        r.failure_code = "invalid-argument";
        r.failure_message = e.what();
        r.answer_stage = agent::AnswerStage::without_clue;
      }
      std::lock_guard lock(writer);
      log << result_to_json(r) << '\n';
      log.flush();
      results.push_back(std::move(r));
    }
  };
  const std::size_t n = std::min(options.parallelism, std::max<std::size_t>(todo.size(), 1));
  std::vector<std::thread> threads;
  for (std::size_t t = 1; t < n; ++t) threads.emplace_back(worker);
  worker();
  for (auto& t : threads) t.join();

  BenchReport report = make_report(results, items);
  report.wall_clock_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
  return report;
}

}  // namespace spatial::bench
