#pragma once

#include "spatial/agent/pipeline.hpp"

#include <array>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace spatial::bench {

enum class Category { rotation, among, around, other };
std::string_view to_string(Category c);
/// Case-insensitive; any value mentioning rotation/among/around maps there,
/// everything else is `other`.
Category category_from_text(std::string_view text);

enum class DatasetFormat { mindcube, omni3d };
std::string_view to_string(DatasetFormat f);
DatasetFormat parse_dataset_format(std::string_view text);

struct BenchItem {
  std::string id;
  std::string question;
  agent::AnswerSpace space;
  std::vector<std::filesystem::path> image_paths;
  Category category = Category::other;
  std::string truth;  // letter, "yes"/"no", or the number as written
  std::optional<double> truth_number;
};

/// Record keys per format. The defaults define the reference schema of the
/// bundled fixtures.
struct FieldMap {
  std::string id = "id";
  std::string question = "question";
  std::string images = "images";  // array of paths, or a single path string
  std::string category = "setting";
  std::string answer = "gt_answer";
  std::string answer_type = "answer_type";  // omni3d only
  std::string options = "options";          // omni3d only, optional

  static FieldMap defaults(DatasetFormat format);
  /// Applies "field=key" overrides; throws invalid_argument on unknown fields.
  void apply(const std::vector<std::string>& overrides);
};

/// Splits "A. ..." options from the question: first on line starts, then
/// inline. Returns the question stem and the options (empty when the
/// embedding is malformed).
std::pair<std::string, std::vector<std::pair<std::string, std::string>>> split_options(const std::string& question);

/// Reads line-delimited records. Image paths resolve against `images_root`.
/// Throws dataset_parse ("<path>:<line>: ...") for malformed records and
/// missing_image naming the absent file.
std::vector<BenchItem> load_dataset(const std::filesystem::path& path, DatasetFormat format,
                                    const std::filesystem::path& images_root, const FieldMap& fields);
std::vector<BenchItem> load_dataset(const std::filesystem::path& path, DatasetFormat format,
                                    const std::filesystem::path& images_root);

/// Thresholds 0.50, 0.55, ..., 0.95.
constexpr std::array<int, 10> kMraThresholdsPercent{50, 55, 60, 65, 70, 75, 80, 85, 90, 95};

/// Fraction of thresholds theta with |pred - truth| / |truth| < 1 - theta,
/// evaluated as |pred - truth| * 100 < (100 - theta%) * |truth| so that
/// exact ties do not depend on rounding. Throws invalid_argument for a zero
/// or non-finite truth.
double score_mra(double prediction, double truth);

struct BenchResult {
  std::string id;
  agent::Choice prediction;
  agent::AnswerStage answer_stage = agent::AnswerStage::with_clue;
  std::optional<agent::FailureStage> failure;
  std::string failure_code;
  std::string failure_message;
  agent::StageTimings timings;
  std::string program_text;
};

/// Per-item score in [0, 1]: exact match for letters, yes/no and counts,
/// MRA for numeric-other. A failed query with no usable prediction scores 0.
/// Unset when the item cannot be scored (zero numeric truth).
std::optional<double> score_item(const BenchItem& item, const BenchResult& result);

struct CategoryScore {
  double accuracy = 0.0;
  std::size_t items = 0;
};

struct AccuracyScores {
  double overall = 0.0;
  std::size_t items = 0;
  /// Only categories with at least one scored item appear.
  std::map<Category, CategoryScore> per_category;
  std::vector<std::string> excluded;  // ids of unscorable items
};

/// results[i] must belong to items[i]; throws length_mismatch otherwise.
AccuracyScores score_accuracy(const std::vector<BenchResult>& results, const std::vector<BenchItem>& items);

struct BenchReport {
  AccuracyScores accuracy;
  std::optional<double> mra;  // mean over numeric-other items
  std::size_t mra_items = 0;
  std::map<agent::FailureStage, std::size_t> failures;
  std::size_t failure_total = 0;
  agent::StageTimings mean_timings;
  double wall_clock_seconds = 0.0;
};

/// Matches results to items by id (items without a result are skipped) and
/// scores them. Pure apart from wall_clock_seconds, which stays 0.
BenchReport make_report(const std::vector<BenchResult>& results, const std::vector<BenchItem>& items);

/// Timings are omitted when `include_timings` is false, leaving only the
/// fields that must be identical across runs.
std::string report_to_json(const BenchReport& report, bool include_timings = true);
/// Plain-text table: Overall / Rotation / Among / Around, then MRA, failure
/// counts and stage timings.
std::string report_table(const BenchReport& report);

std::string result_to_json(const BenchResult& result);
BenchResult result_from_json(const std::string& line);
/// Reads a results log, skipping a torn final line and keeping the first
/// record of any repeated id.
std::vector<BenchResult> read_results(const std::filesystem::path& path);

struct BenchPipeline {
  agent::ChatClient* client = nullptr;
  agent::PipelineOptions options;
  /// Supplies the reconstruction for an item.
  std::function<ReconstructionBundle(const BenchItem&)> bundles;
};

/// Loads the item's images and runs the agent pipeline on them. Scene load
/// failures are tagged as reconstruction failures.
BenchResult run_item(const BenchItem& item, const BenchPipeline& pipeline);

struct RunOptions {
  std::size_t parallelism = 1;
  std::filesystem::path results_path;
  /// Keep results already in the log and only run the missing items.
  bool resume = false;
  /// Stop after this many new results (simulates an interrupted run).
  std::optional<std::size_t> limit;
};

/// Runs the items on `parallelism` workers, appending each result to the log
/// as it completes, then reports over every item with a result.
BenchReport run_bench(const std::vector<BenchItem>& items, const BenchPipeline& pipeline, const RunOptions& options);

}  // namespace spatial::bench
