#include "spatial/agent/pipeline.hpp"
#include "spatial/bench/bench.hpp"
#include "spatial/bundle.hpp"
#include "spatial/point_cloud.hpp"
#include "spatial/remote.hpp"
#include "spatial/renderer.hpp"
#include "spatial/scene.hpp"
#include "spatial/spl/interpreter.hpp"
#include "spatial/spl/parser.hpp"
#include "spatial/synthetic.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdio>
#include <fstream>
#include <iostream>
#include <memory>
#include <sstream>

namespace {

using namespace spatial;
using nlohmann::json;
namespace fs = std::filesystem;

/// A flag combination the parser cannot reject on its own; exits 2.
struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::missing_file, "cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out || !(out << text)) throw Error(ErrorCode::io_error, "cannot write " + path.string());
}

// ---- shared flags -----------------------------------------------------------

struct SandboxFlags {
  std::int64_t max_steps = spl::ExecutionLimits{}.max_steps;
  std::int64_t max_images = spl::ExecutionLimits{}.max_rendered_images;
  double wall_clock = spl::ExecutionLimits{}.wall_clock_budget;
  double rotation_step = kDefaultRotationDeg;
  double move_step = kDefaultMoveStep;
  int point_radius = kDefaultPointRadius;

  void add_to(CLI::App* app) {
    app->add_option("--max-steps", max_steps, "Sandbox step budget")->capture_default_str()->check(CLI::PositiveNumber);
    app->add_option("--max-images", max_images, "Most images a program may render")
        ->capture_default_str()
        ->check(CLI::PositiveNumber);
    app->add_option("--wall-clock", wall_clock, "Sandbox wall-clock budget in seconds, excluding reconstruction")
        ->capture_default_str()
        ->check(CLI::PositiveNumber);
    app->add_option("--rotation-step", rotation_step,
                    "Degrees used by rotate_left/rotate_right calls that omit the angle")
        ->capture_default_str();
    app->add_option("--move-step", move_step,
                    "Scene units used by move_forward/move_backward calls that omit the distance")
        ->capture_default_str();
    app->add_option("--point-radius", point_radius, "Splat half-width in pixels for rendered views")
        ->capture_default_str()
        ->check(CLI::NonNegativeNumber);
  }

  spl::ExecutionLimits limits() const {
    spl::ExecutionLimits l;
    l.max_steps = max_steps;
    l.max_rendered_images = max_images;
    l.wall_clock_budget = wall_clock;
    return l;
  }

  spl::ToolOptions tools() const {
    spl::ToolOptions t;
    t.render.point_radius = point_radius;
    t.rotation_deg = rotation_step;
    t.move_step = move_step;
    return t;
  }
};

struct ModelFlags {
  std::string model = "gpt-4o";
  std::string answer_model;
  int examples = 2;
  int retry_budget = 2;
  bool structured = false;
  std::string mock;
  std::string record;
  std::string base_url;
  double timeout = 120.0;
  int max_attempts = 5;

  void add_to(CLI::App* app) {
    app->add_option("--model", model, "Chat model for program generation (and answering unless --answer-model)")
        ->capture_default_str();
    app->add_option("--answer-model", answer_model, "Chat model for the answer stage");
    app->add_option("--examples", examples, "In-context example programs in the prompt")
        ->capture_default_str()
        ->check(CLI::IsMember({0, 2, 4}));
    app->add_option("--retry-budget", retry_budget, "Re-prompts allowed after an unusable program")
        ->capture_default_str()
        ->check(CLI::NonNegativeNumber);
    app->add_flag("--structured-output", structured, "Request JSON {reasoning, code} from the endpoint");
    app->add_option("--mock", mock, "Replay responses from a JSONL fixture instead of calling an endpoint")
        ->check(CLI::ExistingFile);
    app->add_option("--record", record, "Append every exchange to this JSONL file (replayable with --mock)");
    app->add_option("--base-url", base_url, "Chat-completions base URL (default: OPENAI_BASE_URL or the OpenAI API)");
    app->add_option("--timeout", timeout, "Per-request timeout in seconds")->capture_default_str()->check(
        CLI::PositiveNumber);
    app->add_option("--max-attempts", max_attempts, "Attempts per request on 429/5xx")
        ->capture_default_str()
        ->check(CLI::PositiveNumber);
  }

  agent::AgentConfig agent_config() const {
    agent::AgentConfig c;
    c.codegen_model = model;
    c.answer_model = answer_model.empty() ? model : answer_model;
    c.example_count = examples;
    c.retry_budget = retry_budget;
    c.structured_output = structured;
    return c;
  }
};

class ClientStack {
 public:
  explicit ClientStack(const ModelFlags& flags) {
    if (!flags.mock.empty()) {
      base_ = std::make_unique<agent::MockChatClient>(agent::read_mock_entries(flags.mock));
    } else {
      agent::OpenAIConfig config = agent::with_environment({});
      if (!flags.base_url.empty()) config.base_url = flags.base_url;
      config.timeout_seconds = flags.timeout;
      config.max_attempts = flags.max_attempts;
      base_ = std::make_unique<agent::OpenAIClient>(config);
    }
    if (!flags.record.empty()) recorder_ = std::make_unique<agent::RecordingChatClient>(*base_, flags.record);
  }

  agent::ChatClient& get() { return recorder_ ? *recorder_ : *base_; }

 private:
  std::unique_ptr<agent::ChatClient> base_;
  std::unique_ptr<agent::ChatClient> recorder_;
};

json timings_json(const agent::StageTimings& t) {
  return {{"codegen", t.codegen}, {"execution", t.execution}, {"reconstruction", t.reconstruction},
          {"answer", t.answer}};
}

json choice_json(const agent::Choice& c) {
  static const char* kinds[] = {"letter", "number", "text"};
  json j = {{"kind", kinds[static_cast<int>(c.kind)]}, {"value", c.value}};
  if (c.kind == agent::Choice::Kind::number) j["number"] = c.number;
  return j;
}

// ---- reconstruct ------------------------------------------------------------

struct ReconstructFlags {
  std::vector<std::string> images;
  std::string backend = "file";
  std::string bundle;
  std::string endpoint;
  double timeout = 120.0;
  std::string pattern = "orbit";
  int width = 256;
  int height = 192;
  std::string units = "normalized";
  std::string out;
};

int cmd_reconstruct(const ReconstructFlags& f) {
  ReconstructionBundle bundle;
  if (f.backend == "file") {
    if (f.bundle.empty()) throw UsageError("--backend file needs --bundle");
    if (!f.images.empty()) throw UsageError("--backend file reads --bundle, not --images");
    bundle = load_bundle(f.bundle);
  } else if (f.backend == "http") {
    if (f.endpoint.empty()) throw UsageError("--backend http needs --endpoint");
    if (f.images.empty()) throw UsageError("--backend http needs --images");
    std::vector<fs::path> inputs(f.images.begin(), f.images.end());
    bundle = reconstruct_remote(expand_image_inputs(inputs), f.endpoint, std::chrono::duration<double>(f.timeout));
  } else {
    if (!f.images.empty()) throw UsageError("--backend synthetic renders its own views; drop --images");
    auto spec = SyntheticSceneSpec::box_and_spheres(parse_trajectory_pattern(f.pattern));
    spec.width = f.width;
    spec.height = f.height;
    spec.focal = 200.0 * f.width / 256.0;
    spec.units = parse_scene_units(f.units);
    bundle = synthesize_scene(spec).first;
  }
  save_bundle(bundle, f.out);
  std::cout << json{{"out", f.out},
                    {"frames", bundle.frames.size()},
                    {"width", bundle.width()},
                    {"height", bundle.height()},
                    {"units", to_string(bundle.units)},
                    {"source_tag", bundle.source_tag}}
                   .dump()
            << '\n';
  return 0;
}

// ---- describe-motion --------------------------------------------------------

int cmd_describe_motion(const std::string& bundle_dir) {
  const auto bundle = load_bundle(bundle_dir);
  const auto poses = bundle.poses();
  std::cout << describe_camera_motion(poses, bundle.units) << '\n';
  return 0;
}

// ---- render -----------------------------------------------------------------

struct RenderFlags {
  std::string bundle;
  std::size_t pose_from = 0;
  std::string out;
  int width = 0;
  int height = 0;
  int point_radius = kDefaultPointRadius;
  std::vector<CLI::Option*> ops;
};

double op_value(const std::string& text, double fallback, const std::string& flag) {
  if (text.empty()) return fallback;
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(text, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used != text.size() || !std::isfinite(v)) throw UsageError(flag + ": '" + text + "' is not a number");
  return v;
}

int cmd_render(const RenderFlags& f, const CLI::App& sub) {
  const auto bundle = load_bundle(f.bundle);
  if (f.pose_from >= bundle.frames.size()) {
    throw Error(ErrorCode::index_out_of_range, "--pose-from " + std::to_string(f.pose_from) + " but the bundle has " +
                                                   std::to_string(bundle.frames.size()) + " frames");
  }
  ExtrinsicPose pose = bundle.frames[f.pose_from].pose;
  std::map<const CLI::Option*, std::size_t> used;
  for (const CLI::Option* opt : sub.parse_order()) {
    if (std::find(f.ops.begin(), f.ops.end(), opt) == f.ops.end()) continue;
    const std::string name = opt->get_name();
    if (name == "--turn-around") {
      pose = turn_around(pose);
      continue;
    }
    const auto& results = opt->results();
    const std::size_t k = used[opt]++;
    const std::string text = k < results.size() ? results[k] : "";
    if (name == "--rotate-left") pose = rotate_left(pose, op_value(text, kDefaultRotationDeg, name));
    if (name == "--rotate-right") pose = rotate_right(pose, op_value(text, kDefaultRotationDeg, name));
    if (name == "--move-forward") pose = move_forward(pose, op_value(text, kDefaultMoveStep, name));
    if (name == "--move-backward") pose = move_backward(pose, op_value(text, kDefaultMoveStep, name));
  }
  for (const CLI::Option* opt : f.ops) {
    const auto seen = static_cast<std::size_t>(std::count(sub.parse_order().begin(), sub.parse_order().end(), opt));
    const std::size_t given = opt->get_name() == "--turn-around" ? opt->count() : opt->results().size();
    if (given != seen) throw UsageError(opt->get_name() + " is order-dependent and must be given on the command line");
  }
  RenderOptions options;
  options.width = f.width;
  options.height = f.height;
  options.point_radius = f.point_radius;
  const auto cloud = build_point_cloud(bundle);
  const RenderedImage view = synthesize_novel_view(cloud, pose, bundle.frames[f.pose_from].intrinsics, options);
  write_png(view.to_image(), f.out);
  std::cout << json{{"out", f.out}, {"width", view.width}, {"height", view.height}, {"coverage", view.coverage_fraction}}
                   .dump()
            << '\n';
  return 0;
}

// ---- run-program ------------------------------------------------------------

struct RunProgramFlags {
  std::string program;
  std::string bundle;
  std::vector<std::string> images;
  std::string question;
  std::string out_dir = ".";
  std::string trace;
  bool json_output = false;
  SandboxFlags sandbox;
};

int cmd_run_program(const RunProgramFlags& f) {
  const spl::ProgramSource source{read_file(f.program), spl::SourceOrigin::cli};
  std::optional<ReconstructionBundle> bundle;
  if (!f.bundle.empty()) bundle = load_bundle(f.bundle);
  Scene scene;
  if (!f.images.empty()) {
    scene = Scene::load(f.question, std::vector<fs::path>(f.images.begin(), f.images.end()));
  } else if (bundle) {
    scene = Scene::from_bundle(f.question, *bundle);
  } else {
    throw UsageError("run-program needs --images or --bundle");
  }
  spl::BundleProvider provider;
  if (bundle) provider = [&](const Scene&) { return *bundle; };

  spl::ProgramOutput output;
  try {
    output = spl::execute(spl::parse_program(source), scene, provider, f.sandbox.limits(), f.sandbox.tools());
  } catch (const spl::ProgramError& e) {
    if (!f.trace.empty()) write_file(f.trace, spl::trace_to_jsonl(e.partial_trace()));
    throw Error(e.code(), f.program + ":" + std::to_string(e.location().line) + ":" +
                              std::to_string(e.location().column) + ": " + e.detail());
  }
  if (!f.trace.empty()) write_file(f.trace, spl::trace_to_jsonl(output.trace));

  std::vector<std::string> written;
  for (std::size_t i = 0; i < output.images.size(); ++i) {
    char name[32];
    std::snprintf(name, sizeof(name), "view_%02zu.png", i);
    const fs::path path = fs::path(f.out_dir) / name;
    fs::create_directories(f.out_dir);
    write_png(output.images[i], path);
    written.push_back(path.string());
  }
  if (f.json_output) {
    json trace = json::array();
    for (const auto& t : output.trace) {
      trace.push_back({{"step", t.step}, {"call", t.call}, {"args_summary", t.args_summary},
                       {"output_kind", t.output_kind}});
    }
    json j = {{"kind", spl::to_string(output.kind)}, {"images", written}, {"trace", trace}};
    if (output.kind == spl::OutputKind::text) j["text"] = output.text;
    std::cout << j.dump(2) << '\n';
  } else if (output.kind == spl::OutputKind::text) {
    std::cout << output.text << '\n';
  } else {
    for (const auto& w : written) std::cout << w << '\n';
  }
  return 0;
}

// ---- ask --------------------------------------------------------------------

struct AskFlags {
  std::vector<std::string> images;
  std::string question;
  std::string bundle;
  std::string endpoint;
  std::string answer_type;
  std::string trace;
  ModelFlags model;
  SandboxFlags sandbox;
};

agent::AnswerSpace answer_space(const std::string& question, const std::string& type) {
  agent::AnswerSpace space;
  space.options = bench::split_options(question).second;
  if (type.empty()) {
    space.type = space.options.empty() ? agent::AnswerType::free_text : agent::AnswerType::multiple_choice;
    return space;
  }
  space.type = agent::parse_answer_type(type);
  if (space.type == agent::AnswerType::multiple_choice && space.options.empty()) {
    throw UsageError("--answer-type multi-choice but the question has no \"A. ...\" options");
  }
  if (space.type != agent::AnswerType::multiple_choice) space.options.clear();
  return space;
}

int cmd_ask(const AskFlags& f) {
  const agent::AnswerSpace space = answer_space(f.question, f.answer_type);
  const Scene scene = Scene::load(f.question, std::vector<fs::path>(f.images.begin(), f.images.end()));
  spl::BundleProvider provider;
  if (!f.bundle.empty()) {
    const fs::path dir = f.bundle;
    provider = [dir](const Scene&) { return load_bundle(dir); };
  } else if (!f.endpoint.empty()) {
    const std::string endpoint = f.endpoint;
    provider = [endpoint](const Scene& s) { return reconstruct_remote(s.image_paths, endpoint); };
  }
  ClientStack client(f.model);
  agent::PipelineOptions options{f.model.agent_config(), f.sandbox.limits(), f.sandbox.tools()};
  const agent::QueryResult r = agent::run_query(scene, space, provider, client.get(), options);
  if (!f.trace.empty()) write_file(f.trace, spl::trace_to_jsonl(r.trace));

  json out = {{"answer", r.answer.raw_text},
              {"choice", choice_json(r.answer.choice)},
              {"stage", agent::to_string(r.answer.stage)},
              {"answer_type", agent::to_string(space.type)},
              {"failure", r.failure ? json(agent::to_string(*r.failure)) : json(nullptr)},
              {"failure_code", r.failure_code ? json(to_string(*r.failure_code)) : json(nullptr)},
              {"failure_message", r.failure_message},
              {"reasoning", r.reasoning},
              {"program", r.program_text},
              {"trace_path", f.trace.empty() ? json(nullptr) : json(f.trace)},
              {"codegen_requests", r.codegen_requests},
              {"timings", timings_json(r.timings)}};
  std::cout << out.dump(2) << '\n';
  if (r.answer.raw_text.empty()) {
    std::cerr << "spatial: no answer could be obtained: " << r.failure_message << '\n';
    return 1;
  }
  return 0;
}

// ---- bench ------------------------------------------------------------------

struct BenchFlags {
  std::string dataset;
  std::string format = "mindcube";
  std::string images_root;
  std::string bundles_root;
  std::string backend = "file";
  std::string endpoint;
  std::size_t parallelism = 1;
  std::string out;
  std::string results;
  bool resume = false;
  std::size_t limit = 0;
  bool no_timings = false;
  std::vector<std::string> fields;
  ModelFlags model;
  SandboxFlags sandbox;
};

int cmd_bench(const BenchFlags& f) {
  const auto format = bench::parse_dataset_format(f.format);
  bench::FieldMap fields = bench::FieldMap::defaults(format);
  try {
    fields.apply(f.fields);
  } catch (const Error& e) {
    throw UsageError(e.what());
  }
  const fs::path images_root = f.images_root.empty() ? fs::path(f.dataset).parent_path() : fs::path(f.images_root);
  const auto items = bench::load_dataset(f.dataset, format, images_root, fields);

  bench::BenchPipeline pipeline;
  ClientStack client(f.model);
  pipeline.client = &client.get();
  pipeline.options = {f.model.agent_config(), f.sandbox.limits(), f.sandbox.tools()};
  if (f.backend == "file") {
    if (f.bundles_root.empty()) throw UsageError("--backend file needs --bundles-root");
    const fs::path root = f.bundles_root;
    pipeline.bundles = [root](const bench::BenchItem& item) { return load_bundle(root / item.id); };
  } else {
    if (f.endpoint.empty()) throw UsageError("--backend http needs --endpoint");
    const std::string endpoint = f.endpoint;
    pipeline.bundles = [endpoint](const bench::BenchItem& item) {
      return reconstruct_remote(item.image_paths, endpoint);
    };
  }

  bench::RunOptions run;
  run.parallelism = f.parallelism;
  run.resume = f.resume;
  if (f.limit > 0) run.limit = f.limit;
  const fs::path out = f.out;
  run.results_path = f.results.empty() ? out.parent_path() / (out.stem().string() + ".results.jsonl")
                                       : fs::path(f.results);
  const auto report = bench::run_bench(items, pipeline, run);
  write_file(out, bench::report_to_json(report, !f.no_timings));
  std::cout << bench::report_table(report);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Spatial reasoning over reconstructed 3D scenes: reconstruction bundles, camera motion, "
               "novel views, sandboxed programs, the question-answering agent and benchmark runs."};
  app.set_config("--config", "", "INI/TOML file; keys are flag names, one [section] per subcommand");
  app.require_subcommand(1);
  app.footer(
      "Pose conventions: camera +x right, +y down, +z forward. Rotations are in degrees (default 45), "
      "moves in scene units (default 0.3).\nExit status: 0 success, 1 failure, 2 usage error.");

  ReconstructFlags rf;
  auto* reconstruct = app.add_subcommand("reconstruct", "Produce a reconstruction bundle directory");
  reconstruct->add_option("--images", rf.images, "Image files or directories (http backend)");
  reconstruct->add_option("--backend", rf.backend, "file (re-emit --bundle canonically), http or synthetic")
      ->capture_default_str()
      ->check(CLI::IsMember({"file", "http", "synthetic"}));
  reconstruct->add_option("--bundle", rf.bundle, "Existing bundle directory (file backend)")->check(
      CLI::ExistingDirectory);
  reconstruct->add_option("--endpoint", rf.endpoint, "Reconstruction service base URL (http backend)");
  reconstruct->add_option("--timeout", rf.timeout, "http backend deadline in seconds")
      ->capture_default_str()
      ->check(CLI::PositiveNumber);
  reconstruct->add_option("--pattern", rf.pattern, "Synthetic trajectory: orbit, lateral, approach, eight-sector")
      ->capture_default_str()
      ->check(CLI::IsMember({"orbit", "lateral", "approach", "eight-sector"}));
  reconstruct->add_option("--width", rf.width, "Synthetic frame width in pixels")
      ->capture_default_str()
      ->check(CLI::PositiveNumber);
  reconstruct->add_option("--height", rf.height, "Synthetic frame height in pixels")
      ->capture_default_str()
      ->check(CLI::PositiveNumber);
  reconstruct->add_option("--units", rf.units, "Synthetic scene units: normalized or metric-meters")
      ->capture_default_str()
      ->check(CLI::IsMember({"normalized", "metric-meters"}));
  reconstruct->add_option("--out", rf.out, "Output bundle directory")->required();

  std::string motion_bundle;
  auto* motion = app.add_subcommand("describe-motion", "Print the egocentric camera motion between consecutive views");
  motion->add_option("--bundle", motion_bundle, "Bundle directory")->required()->check(CLI::ExistingDirectory);

  RenderFlags render_flags;
  auto* render = app.add_subcommand(
      "render", "Render the bundle's point cloud from a frame pose after pose operations, applied in flag order");
  render->add_option("--bundle", render_flags.bundle, "Bundle directory")->required()->check(CLI::ExistingDirectory);
  render->add_option("--pose-from", render_flags.pose_from, "Frame index whose pose and intrinsics start the chain")
      ->capture_default_str();
  for (const auto& [name, help] : std::vector<std::pair<std::string, std::string>>{
           {"--rotate-left", "Yaw left by N degrees (default 45)"},
           {"--rotate-right", "Yaw right by N degrees (default 45)"},
           {"--move-forward", "Move along the view direction by D scene units (default 0.3)"},
           {"--move-backward", "Move against the view direction by D scene units (default 0.3)"}}) {
    render_flags.ops.push_back(render->add_option(name)
                                   ->description(help + "; repeatable")
                                   ->expected(0, 1)
                                   ->multi_option_policy(CLI::MultiOptionPolicy::TakeAll)
                                   ->type_name(name.find("move") != std::string::npos ? "D" : "N"));
  }
  render_flags.ops.push_back(render->add_flag("--turn-around", "Yaw by 180 degrees in place; repeatable")
                                 ->multi_option_policy(CLI::MultiOptionPolicy::TakeAll));
  render->add_option("--width", render_flags.width, "Output width in pixels (0: frame width)")->capture_default_str();
  render->add_option("--height", render_flags.height, "Output height in pixels (0: frame height)")
      ->capture_default_str();
  render->add_option("--point-radius", render_flags.point_radius, "Splat half-width in pixels")
      ->capture_default_str()
      ->check(CLI::NonNegativeNumber);
  render->add_option("--out", render_flags.out, "Output PNG")->required();

  RunProgramFlags pf;
  auto* run_program = app.add_subcommand("run-program", "Execute a program in the sandbox");
  run_program->add_option("program", pf.program, "Program file")->required()->check(CLI::ExistingFile);
  run_program->add_option("--bundle", pf.bundle, "Bundle returned by pySpatial.reconstruct")
      ->check(CLI::ExistingDirectory);
  run_program->add_option("--images", pf.images, "Scene images (default: the bundle's frames)");
  run_program->add_option("--question", pf.question, "Question text bound to the scene");
  run_program->add_option("--out-dir", pf.out_dir, "Where rendered outputs go as view_NN.png")->capture_default_str();
  run_program->add_option("--trace", pf.trace, "Write the call trace as JSONL");
  run_program->add_flag("--json", pf.json_output, "Print output, written files and trace as one JSON document");
  pf.sandbox.add_to(run_program);

  AskFlags af;
  auto* ask = app.add_subcommand("ask", "Answer a question about a set of images with the program-generating agent");
  ask->add_option("--images", af.images, "Image files or directories, in view order")->required();
  ask->add_option("--question", af.question, "Question, with options as \"A. ...\" lines for multiple choice")
      ->required();
  ask->add_option("--bundle", af.bundle, "Precomputed reconstruction")->check(CLI::ExistingDirectory);
  ask->add_option("--endpoint", af.endpoint, "Reconstruction service used when no --bundle is given");
  ask->add_option("--answer-type", af.answer_type,
                  "multi-choice, yes/no, numeric-count, numeric-other or free-text (default: multi-choice when "
                  "options are present, else free-text)")
      ->check(CLI::IsMember({"multi-choice", "yes/no", "numeric-count", "numeric-other", "free-text"}));
  ask->add_option("--trace", af.trace, "Write the execution trace as JSONL; its path is echoed in the output");
  af.model.add_to(ask);
  af.sandbox.add_to(ask);

  BenchFlags bf;
  auto* bench_cmd = app.add_subcommand("bench", "Run the agent over a dataset and score it");
  bench_cmd->add_option("--dataset", bf.dataset, "JSONL dataset")->required()->check(CLI::ExistingFile);
  bench_cmd->add_option("--format", bf.format, "mindcube or omni3d")
      ->capture_default_str()
      ->check(CLI::IsMember({"mindcube", "omni3d"}));
  bench_cmd->add_option("--images-root", bf.images_root, "Base for relative image paths (default: dataset directory)");
  bench_cmd->add_option("--bundles-root", bf.bundles_root, "Per-item bundles at <root>/<id> (file backend)");
  bench_cmd->add_option("--backend", bf.backend, "file (precomputed bundles) or http (reconstruct each item)")
      ->capture_default_str()
      ->check(CLI::IsMember({"file", "http"}));
  bench_cmd->add_option("--endpoint", bf.endpoint, "Reconstruction service base URL (http backend)");
  bench_cmd->add_option("--parallelism", bf.parallelism, "Concurrent queries")
      ->capture_default_str()
      ->check(CLI::PositiveNumber);
  bench_cmd->add_option("--out", bf.out, "Report JSON")->required();
  bench_cmd->add_option("--results", bf.results, "Per-item results log (default: <out stem>.results.jsonl)");
  bench_cmd->add_flag("--resume", bf.resume, "Keep results already logged and run only the missing items");
  bench_cmd->add_option("--limit", bf.limit, "Stop after this many new results (0: no limit)")->capture_default_str();
  bench_cmd->add_flag("--no-timings", bf.no_timings, "Leave timings out of the report JSON");
  bench_cmd->add_option("--field", bf.fields, "Dataset key override field=key (id, question, images, category, "
                                               "answer, answer_type, options); repeatable");
  bf.model.add_to(bench_cmd);
  bf.sandbox.add_to(bench_cmd);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "spatial: " << e.what() << "\nRun with --help for usage.\n";
    return 2;
  }

  try {
    if (reconstruct->parsed()) return cmd_reconstruct(rf);
    if (motion->parsed()) return cmd_describe_motion(motion_bundle);
    if (render->parsed()) return cmd_render(render_flags, *render);
    if (run_program->parsed()) return cmd_run_program(pf);
    if (ask->parsed()) return cmd_ask(af);
    if (bench_cmd->parsed()) return cmd_bench(bf);
  } catch (const UsageError& e) {
    std::cerr << "spatial: " << e.what() << '\n';
    return 2;
  } catch (const Error& e) {
    std::cerr << "spatial: " << to_string(e.code()) << ": " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "spatial: " << e.what() << '\n';
    return 1;
  }
  return 2;
}
