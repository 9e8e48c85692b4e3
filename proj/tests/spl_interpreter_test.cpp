#include "spatial/spl/interpreter.hpp"
#include "spatial/spl/parser.hpp"
#include "spatial/synthetic.hpp"
#include "support/test_support.hpp"

#include <gtest/gtest.h>
#include <json.hpp>

#include <chrono>
#include <random>

namespace spatial::spl {
namespace {

struct Fixture {
  ReconstructionBundle bundle;
  Scene scene;
  BundleProvider provider;
};

Fixture make_fixture(TrajectoryPattern pattern, std::size_t frames = 0, const std::string& question = "q?") {
  auto spec = SyntheticSceneSpec::box_and_spheres(pattern);
  if (frames > 0) {
    auto waypoints = pattern_waypoints(pattern);
    waypoints.resize(frames);
    spec.trajectory = waypoints;
  }
  Fixture f;
  f.bundle = synthesize_scene(spec).first;
  f.scene = Scene::from_bundle(question, f.bundle);
  f.provider = [b = f.bundle](const Scene&) { return b; };
  return f;
}

const Fixture& orbit() {
  static const Fixture f = make_fixture(TrajectoryPattern::orbit);
  return f;
}

ProgramOutput run(const std::string& text, const Fixture& f = orbit(), const ExecutionLimits& limits = {}) {
  return execute(parse_program({text, SourceOrigin::fixture}), f.scene, f.provider, limits);
}

std::string run_text(const std::string& body) {
  const auto out = run("def program(s):\n" + body);
  EXPECT_EQ(out.kind, OutputKind::text);
  return out.text;
}

ProgramError run_error(const std::string& text, const Fixture& f = orbit(), const ExecutionLimits& limits = {}) {
  try {
    run(text, f, limits);
  } catch (const ProgramError& e) {
    return e;
  }
  ADD_FAILURE() << "expected a runtime error for:\n" << text;
  return ProgramError(ErrorCode::invalid_argument, {}, "none");
}

std::string fixture_program(const std::string& name) {
  return testing::read_text(testing::fixture_path("programs/" + name));
}

TEST(Interpreter, ProblemOneMatchesDirectCall) {
  const Fixture f = make_fixture(TrajectoryPattern::lateral, 2);
  const auto out = run(fixture_program("problem1.spl"), f);
  ASSERT_EQ(out.kind, OutputKind::text);
  const auto poses = f.bundle.poses();
  EXPECT_EQ(out.text, describe_camera_motion(poses, f.bundle.units));
  ASSERT_EQ(out.trace.size(), 2u);
  EXPECT_EQ(out.trace[0].call, "pySpatial.reconstruct");
  EXPECT_EQ(out.trace[0].output_kind, "reconstruction");
  EXPECT_EQ(out.trace[1].call, "pySpatial.describe_camera_motion");
  EXPECT_EQ(out.trace[1].output_kind, "text");
}

TEST(Interpreter, ProblemTwoRendersTwoViews) {
  const Fixture& f = orbit();
  const auto out = run(fixture_program("problem2.spl"), f);
  ASSERT_EQ(out.kind, OutputKind::image_list);
  ASSERT_EQ(out.images.size(), 2u);
  const PointCloud cloud = build_point_cloud(f.bundle);
  const ExtrinsicPose right = rotate_right(f.bundle.frames[0].pose);
  const ExtrinsicPose forward = move_forward(right);
  EXPECT_EQ(out.images[0], synthesize_novel_view(cloud, right, f.bundle.frames[0].intrinsics).to_image());
  EXPECT_EQ(out.images[1], synthesize_novel_view(cloud, forward, f.bundle.frames[0].intrinsics).to_image());
  ASSERT_EQ(out.trace.size(), 5u);
  EXPECT_EQ(out.trace[4].output_kind, "image");
  ASSERT_EQ(out.comments.size(), 2u);
}

TEST(Interpreter, TrivialProgramHasEmptyTrace) {
  const auto out = run("def program(s): return \"x\"");
  EXPECT_EQ(out.kind, OutputKind::text);
  EXPECT_EQ(out.text, "x");
  EXPECT_TRUE(out.trace.empty());
}

TEST(Interpreter, FirstExtrinsicIsFrameZero) {
  const Fixture& f = orbit();
  const auto out = run(
      "def program(s):\n    r = pySpatial.reconstruct(s)\n    return pySpatial.synthesize_novel_view(r, r.extrinsics[0])\n");
  ASSERT_EQ(out.kind, OutputKind::image);
  const PointCloud cloud = build_point_cloud(f.bundle);
  EXPECT_EQ(out.images[0],
            synthesize_novel_view(cloud, f.bundle.frames[0].pose, f.bundle.frames[0].intrinsics).to_image());
}

TEST(Interpreter, PoseToolDefaults) {
  const std::string prefix = "def program(s):\n    p = pySpatial.reconstruct(s).extrinsics[1]\n";
  EXPECT_EQ(run(prefix + "    return pySpatial.rotate_right(p) == pySpatial.rotate_right(p, angle=45)\n").text, "True");
  EXPECT_EQ(run(prefix + "    return pySpatial.rotate_right(p) == pySpatial.rotate_right(p, 90)\n").text, "False");
  EXPECT_EQ(run(prefix + "    return pySpatial.move_forward(p) == pySpatial.move_forward(p, distance=0.3)\n").text,
            "True");
  EXPECT_EQ(run(prefix + "    return pySpatial.turn_around(pySpatial.turn_around(p)) == p\n").text, "True");
  const auto& pose = orbit().bundle.frames[1].pose;
  const Vec3 c = camera_center(move_forward(pose));
  auto fmt = [](double x) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.3f", std::abs(x) < 5e-4 ? 0.0 : x);
    return std::string(buf);
  };
  const std::string expected = "Pose(view=2, center=[" + fmt(c.x()) + ", " + fmt(c.y()) + ", " + fmt(c.z()) + "])";
  EXPECT_EQ(run(prefix + "    return pySpatial.move_forward(p)\n").text, expected);
}

TEST(Interpreter, SceneAndReconstructionFields) {
  const Fixture f = make_fixture(TrajectoryPattern::orbit, 0, "Which way?");
  EXPECT_EQ(run("def program(s):\n    return s.question\n", f).text, "Which way?");
  EXPECT_EQ(run("def program(s):\n    return len(s.images)\n", f).text, "4");
  EXPECT_EQ(run("def program(s):\n    return pySpatial.reconstruct(s).intrinsics[0].width\n", f).text, "256");
  EXPECT_EQ(run("def program(s):\n    return pySpatial.estimate_depth(s.images[2]).height\n", f).text, "192");
  const auto out = run("def program(s):\n    return s.images[1]\n", f);
  ASSERT_EQ(out.kind, OutputKind::image);
  EXPECT_EQ(out.images[0], f.bundle.frames[1].image);
  const auto cloud = run("def program(s):\n    return pySpatial.reconstruct(s).point_cloud\n", f);
  EXPECT_EQ(cloud.text, "<point cloud: " + std::to_string(4 * 256 * 192) + " points>");
}

TEST(Interpreter, ReconstructIsCachedPerExecution) {
  const Fixture& f = orbit();
  int calls = 0;
  BundleProvider counting = [&](const Scene&) {
    ++calls;
    return f.bundle;
  };
  const auto program = parse_program(
      {"def program(s):\n    a = pySpatial.reconstruct(s)\n    b = pySpatial.reconstruct(s)\n    return a is b\n",
       SourceOrigin::fixture});
  EXPECT_EQ(execute(program, f.scene, counting).text, "True");
  EXPECT_EQ(calls, 1);
}

TEST(Interpreter, PythonArithmetic) {
  EXPECT_EQ(run_text("    return [-7 // 2, -7 % 2, 7 % -2, 7 // -2, 2 ** 10, 2 ** -1, 7 / 2, 6 / 3]\n"),
            "[-4, 1, -1, -4, 1024, 0.5, 3.5, 2.0]");
  EXPECT_EQ(run_text("    return [7.5 // 2, -7.5 % 2, 0.1 + 0.2, 1e22, 1e-05, 0.0001, -0.0]\n"),
            "[3.0, 0.5, 0.30000000000000004, 1e+22, 1e-05, 0.0001, -0.0]");
  EXPECT_EQ(run_text("    return [True + 1, 3 * 'ab', [0] * 3, [1, 2] + [3], 'a' + 'b']\n"),
            "[2, 'ababab', [0, 0, 0], [1, 2, 3], 'ab']");
  EXPECT_EQ(run_text("    return [1 < 2 < 3, 1 < 3 < 2, 0 or 'x', 1 and [], not None, 2 in [1, 2], 'b' not in 'abc']\n"),
            "[True, False, 'x', [], True, True, False]");
  EXPECT_EQ(run_text("    return [1, 2.5, 'it\\'s', None, [True]]\n"),
            "[1, 2.5, \"it's\", None, [True]]");
}

TEST(Interpreter, SequencesAndLoops) {
  EXPECT_EQ(run_text("    a = [1, 2, 3, 4, 5]\n    return [a[-1], a[1:3], a[::-1], a[::2], a[10:], a[-2:]]\n"),
            "[5, [2, 3], [5, 4, 3, 2, 1], [1, 3, 5], [], [4, 5]]");
  EXPECT_EQ(run_text("    t = 'h\xc3\xa9llo'\n    return [len(t), t[1], t[::-1]]\n"), "[5, '\xc3\xa9', 'oll\xc3\xa9h']");
  EXPECT_EQ(run_text("    total = 0\n    for i in range(1, 11):\n        if i % 2 == 0:\n            total += i\n"
                     "        elif i == 5:\n            total -= 100\n        else:\n            total += 0\n    return total\n"),
            "-70");
  EXPECT_EQ(run_text("    out = []\n    for c in 'ab':\n        out.append(c)\n    out += ['z']\n    out[0] = 'y'\n    return out\n"),
            "['y', 'b', 'z']");
  EXPECT_EQ(run_text("    for i in range(5):\n        if i == 3:\n            return i\n"), "3");
  EXPECT_EQ(run_text("    x = 1\n"), "None");
  EXPECT_EQ(run_text("    return range(2, 10, 3)\n"), "range(2, 10, 3)");
  EXPECT_EQ(run_text("    a = []\n    a.append(a)\n    return a\n"), "[[...]]");
}

TEST(Interpreter, RuntimeErrorsAreTypedAndLocated) {
  struct Case {
    std::string body;
    ErrorCode code;
    int line;
  };
  const std::vector<Case> cases{
      {"    return y\n    y = 1\n", ErrorCode::unknown_name, 2},
      {"    return 'a' + 1\n", ErrorCode::type_mismatch, 2},
      {"    x = 1\n    return [1][5]\n", ErrorCode::index_out_of_range, 3},
      {"    return 1 / 0\n", ErrorCode::arithmetic_error, 2},
      {"    return 2 ** 63\n", ErrorCode::arithmetic_error, 2},
      {"    return s.colour\n", ErrorCode::unknown_name, 2},
      {"    return len(5)\n", ErrorCode::type_mismatch, 2},
      {"    return pySpatial.rotate_right(s)\n", ErrorCode::type_mismatch, 2},
      {"    return pySpatial.rotate_right(pySpatial.reconstruct(s).extrinsics[0], speed=3)\n", ErrorCode::type_mismatch, 2},
      {"    return pySpatial.reconstruct(s).extrinsics[9]\n", ErrorCode::index_out_of_range, 2},
      {"    for i in 5:\n        x = i\n", ErrorCode::type_mismatch, 2},
      {"    return [1] < ['a']\n", ErrorCode::type_mismatch, 2},
      {"    return range(1, 2, 0)\n", ErrorCode::arithmetic_error, 2},
  };
  for (const auto& c : cases) {
    SCOPED_TRACE(c.body);
    const ProgramError e = run_error("def program(s):\n" + c.body);
    EXPECT_EQ(e.code(), c.code) << e.what();
    EXPECT_EQ(e.location().line, c.line);
  }
}

TEST(Interpreter, RuntimeErrorCarriesPartialTrace) {
  const ProgramError e = run_error(
      "def program(s):\n    r = pySpatial.reconstruct(s)\n    p = pySpatial.rotate_left(r.extrinsics[0])\n"
      "    return pySpatial.synthesize_novel_view(r, 3)\n");
  EXPECT_EQ(e.code(), ErrorCode::type_mismatch);
  ASSERT_EQ(e.partial_trace().size(), 3u);
  EXPECT_EQ(e.partial_trace()[1].call, "pySpatial.rotate_left");
  EXPECT_EQ(e.partial_trace()[2].output_kind, "error");
}

TEST(Interpreter, ReconstructionFailureIsTagged) {
  Fixture f = orbit();
  f.provider = [](const Scene&) -> ReconstructionBundle { throw Error(ErrorCode::backend_failure, "HTTP 500"); };
  const ProgramError e = run_error(fixture_program("problem1.spl"), f);
  EXPECT_EQ(e.code(), ErrorCode::reconstruction_failed);
  EXPECT_NE(std::string(e.what()).find("HTTP 500"), std::string::npos);
  ASSERT_EQ(e.partial_trace().size(), 1u);
  EXPECT_EQ(e.partial_trace()[0].output_kind, "error");
}

TEST(Interpreter, HugeRangeHitsStepLimitQuickly) {
  const ExecutionLimits limits;
  const auto start = std::chrono::steady_clock::now();
  const ProgramError e = run_error("def program(s):\n    n = 0\n    for i in range(10 ** 9):\n        n += 1\n    return n\n",
                                   orbit(), limits);
  const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  EXPECT_EQ(e.code(), ErrorCode::step_limit);
  EXPECT_EQ(e.location().line, 3);
  EXPECT_LT(seconds, 2 * limits.wall_clock_budget);
}

TEST(Interpreter, StepBudgetCoversNestedLoopsAndRepetition) {
  ExecutionLimits limits;
  EXPECT_EQ(run_error("def program(s):\n    for i in range(1000):\n        for j in range(1000):\n            x = j\n",
                      orbit(), limits)
                .code(),
            ErrorCode::step_limit);
  EXPECT_EQ(run_error("def program(s):\n    return [0] * 10 ** 12\n").code(), ErrorCode::step_limit);
  EXPECT_EQ(run_error("def program(s):\n    return 'ab' * 10 ** 12\n").code(), ErrorCode::step_limit);
  EXPECT_EQ(run_error("def program(s):\n    x = [1]\n    for i in range(100):\n        x = x + x\n    return len(x)\n").code(),
            ErrorCode::step_limit);
}

TEST(Interpreter, WallClockBudget) {
  ExecutionLimits limits;
  limits.wall_clock_budget = 1e-6;
  limits.max_loop_iterations = 1000000;
  limits.max_steps = 100000000;
  const ProgramError e = run_error("def program(s):\n    for i in range(10 ** 7):\n        x = i\n", orbit(), limits);
  EXPECT_EQ(e.code(), ErrorCode::wall_clock);
}

const char* kEightViews =
    "def program(scene):\n"
    "    recon = pySpatial.reconstruct(scene)\n"
    "    pose = recon.extrinsics[0]\n"
    "    views = []\n"
    "    for i in range(8):\n"
    "        pose = pySpatial.rotate_right(pose)\n"
    "        views.append(pySpatial.synthesize_novel_view(recon, pose))\n"
    "    return views\n";

TEST(Interpreter, EightViewLoopWithinDefaults) {
  const auto out = run(kEightViews);
  ASSERT_EQ(out.kind, OutputKind::image_list);
  EXPECT_EQ(out.images.size(), 8u);
  EXPECT_EQ(out.trace.size(), 1u + 8u + 8u);
  // rotate_right eight times comes back to the input view
  const PointCloud cloud = build_point_cloud(orbit().bundle);
  const auto& frame = orbit().bundle.frames[0];
  const Image self = synthesize_novel_view(cloud, frame.pose, frame.intrinsics).to_image();
  std::size_t differing = 0;
  for (std::size_t i = 0; i < self.rgb.size(); ++i) differing += out.images[7].rgb[i] != self.rgb[i];
  EXPECT_LT(differing, self.rgb.size() / 100);
}

TEST(Interpreter, ImageBudget) {
  ExecutionLimits limits;
  limits.max_rendered_images = 3;
  const ProgramError e = run_error(kEightViews, orbit(), limits);
  EXPECT_EQ(e.code(), ErrorCode::image_budget);
  EXPECT_EQ(e.location().line, 7);
  EXPECT_EQ(e.partial_trace().size(), 1u + 2u * 3u + 2u);
}

TEST(Interpreter, Purity) {
  const auto program = parse_program({fixture_program("problem2.spl"), SourceOrigin::fixture});
  const auto a = execute(program, orbit().scene, orbit().provider);
  const auto b = execute(program, orbit().scene, orbit().provider);
  EXPECT_EQ(a.kind, b.kind);
  EXPECT_EQ(a.images, b.images);
  EXPECT_EQ(a.trace, b.trace);
  EXPECT_EQ(a.comments, b.comments);
}

TEST(Interpreter, TraceJsonl) {
  const auto out = run(fixture_program("problem1.spl"), make_fixture(TrajectoryPattern::lateral, 2));
  const std::string jsonl = trace_to_jsonl(out.trace);
  std::istringstream lines(jsonl);
  std::string line;
  std::string first;
  int n = 0;
  while (std::getline(lines, line)) {
    if (first.empty()) first = line;
    const auto j = nlohmann::json::parse(line);
    EXPECT_EQ(j.size(), 4u);
    EXPECT_TRUE(j.contains("step") && j.contains("call") && j.contains("args_summary") && j.contains("output_kind"));
    ++n;
  }
  EXPECT_EQ(n, 2);
  EXPECT_EQ(first.rfind("{\"step\":", 0), 0u);
}

TEST(Interpreter, LimitsValidated) {
  ExecutionLimits limits;
  limits.max_steps = 0;
  EXPECT_THROW(run("def program(s): return 1", orbit(), limits), Error);
}

// Tightening any limit never turns a failing run into a successful one, and
// a run that succeeds under tight limits succeeds identically under loose ones.
TEST(InterpreterProperty, BudgetMonotonicity) {
  const std::vector<std::string> programs{
      kEightViews,
      "def program(s):\n    n = 0\n    for i in range(300):\n        for j in range(40):\n            n += j\n    return n\n",
      "def program(s):\n    r = pySpatial.reconstruct(s)\n    out = []\n    for p in r.extrinsics:\n"
      "        out.append(pySpatial.synthesize_novel_view(r, pySpatial.turn_around(p)))\n    return out\n",
      "def program(s):\n    x = [0] * 5000\n    return len(x * 3)\n",
  };
  std::mt19937_64 rng(11);
  auto random_limits = [&] {
    ExecutionLimits l;
    l.max_steps = std::uniform_int_distribution<std::int64_t>(1, 40000)(rng);
    l.max_rendered_images = std::uniform_int_distribution<std::int64_t>(1, 10)(rng);
    l.max_loop_iterations = std::uniform_int_distribution<std::int64_t>(1, 400)(rng);
    return l;
  };
  auto outcome = [&](const std::string& text, const ExecutionLimits& l) -> std::optional<ProgramOutput> {
    try {
      return run(text, orbit(), l);
    } catch (const ProgramError&) {
      return std::nullopt;
    }
  };
  for (int trial = 0; trial < 24; ++trial) {
    const std::string& text = programs[static_cast<std::size_t>(trial) % programs.size()];
    const ExecutionLimits loose = random_limits();
    ExecutionLimits tight = loose;
    tight.max_steps = std::uniform_int_distribution<std::int64_t>(1, loose.max_steps)(rng);
    tight.max_rendered_images = std::uniform_int_distribution<std::int64_t>(1, loose.max_rendered_images)(rng);
    tight.max_loop_iterations = std::uniform_int_distribution<std::int64_t>(1, loose.max_loop_iterations)(rng);
    const auto tight_out = outcome(text, tight);
    const auto loose_out = outcome(text, loose);
    if (tight_out) {
      ASSERT_TRUE(loose_out.has_value()) << "trial " << trial;
      EXPECT_EQ(tight_out->text, loose_out->text);
      EXPECT_EQ(tight_out->images.size(), loose_out->images.size());
    }
  }
}

}  // namespace
}  // namespace spatial::spl
