#include "spatial/bundle.hpp"
#include "spatial/remote.hpp"
#include "spatial/synthetic.hpp"
#include "support/bench_fixture.hpp"
#include "support/test_support.hpp"

#include <gtest/gtest.h>
#include <httplib.h>
#include <json.hpp>

#include <cstdio>
#include <sys/wait.h>
#include <thread>

namespace spatial {
namespace {

using nlohmann::json;
using testing::TempDir;
using testing::fixture_path;
using testing::read_text;
namespace fs = std::filesystem;

std::string quote(const std::string& s) {
  std::string out = "'";
  for (char c : s) out += c == '\'' ? std::string("'\\''") : std::string(1, c);
  return out + "'";
}

struct Run {
  int status = -1;
  std::string out;
  std::string err;
};

Run spatial_cli(const std::string& args, const fs::path& cwd) {
  const fs::path err = cwd / ".stderr";
  const std::string cmd = "cd " + quote(cwd.string()) + " && " + quote(SPATIAL_CLI) + " " + args + " 2>" +
                          quote(err.string());
  Run r;
  FILE* pipe = ::popen(cmd.c_str(), "r");
  if (!pipe) return r;
  char buf[4096];
  std::size_t n = 0;
  while ((n = std::fread(buf, 1, sizeof(buf), pipe)) > 0) r.out.append(buf, n);
  const int raw = ::pclose(pipe);
  r.status = WIFEXITED(raw) ? WEXITSTATUS(raw) : -1;
  r.err = read_text(err);
  return r;
}

json without_timings(json j) {
  j.erase("timings");
  return j;
}

class Cli : public ::testing::Test {
 protected:
  fs::path dir() const { return tmp_.path(); }

  fs::path synthetic(const std::string& pattern, const std::string& name, const std::string& extra = "") {
    const auto r = spatial_cli("reconstruct --backend synthetic --pattern " + pattern +
                                   " --width 96 --height 72 --out " + name + " " + extra,
                               dir());
    EXPECT_EQ(r.status, 0) << r.err;
    return dir() / name;
  }

  TempDir tmp_;
};

TEST_F(Cli, UsageErrorsExitTwo) {
  EXPECT_EQ(spatial_cli("", dir()).status, 2);
  EXPECT_EQ(spatial_cli("frobnicate", dir()).status, 2);
  EXPECT_EQ(spatial_cli("describe-motion", dir()).status, 2);
  const auto bad = spatial_cli("ask --images x --question q --examples 3", dir());
  EXPECT_EQ(bad.status, 2);
  EXPECT_TRUE(bad.out.empty());
  EXPECT_FALSE(bad.err.empty());
  EXPECT_EQ(spatial_cli("reconstruct --backend http --out b", dir()).status, 2);
}

TEST_F(Cli, HelpDocumentsDefaultsAndUnits) {
  const auto render = spatial_cli("render --help", dir());
  EXPECT_EQ(render.status, 0);
  EXPECT_NE(render.out.find("degrees (default 45)"), std::string::npos);
  EXPECT_NE(render.out.find("scene units (default 0.3)"), std::string::npos);
  const auto run = spatial_cli("run-program --help", dir());
  EXPECT_NE(run.out.find("--rotation-step FLOAT [45]"), std::string::npos) << run.out;
  EXPECT_NE(run.out.find("--move-step FLOAT [0.3]"), std::string::npos) << run.out;
  for (const char* sub : {"reconstruct", "describe-motion", "ask", "bench"}) {
    const auto r = spatial_cli(std::string(sub) + " --help", dir());
    EXPECT_EQ(r.status, 0) << sub;
    EXPECT_NE(r.out.find("default 45"), std::string::npos) << sub;
    EXPECT_NE(r.out.find("default 0.3"), std::string::npos) << sub;
  }
}

TEST_F(Cli, SyntheticReconstructionIsAValidBundle) {
  const auto r = spatial_cli("reconstruct --backend synthetic --pattern eight-sector --width 64 --height 48 --out b",
                             dir());
  ASSERT_EQ(r.status, 0) << r.err;
  EXPECT_EQ(json::parse(r.out)["frames"], 9);
  const auto bundle = load_bundle(dir() / "b");
  EXPECT_EQ(bundle.frames.size(), 9u);
  EXPECT_EQ(bundle.width(), 64);
}

TEST_F(Cli, FileBackendReemitsCanonically) {
  const auto src = synthetic("orbit", "src");
  // a non-canonical copy: same content, manifest re-indented
  fs::copy(src, dir() / "messy", fs::copy_options::recursive);
  const auto manifest = json::parse(read_text(dir() / "messy" / "manifest.json"));
  std::ofstream(dir() / "messy" / "manifest.json") << manifest.dump(7);
  const auto r = spatial_cli("reconstruct --backend file --bundle messy --out clean", dir());
  ASSERT_EQ(r.status, 0) << r.err;
  EXPECT_EQ(serialize_bundle(load_bundle(dir() / "clean")), serialize_bundle(load_bundle(src)));
  EXPECT_EQ(read_text(dir() / "clean" / "manifest.json"), read_text(src / "manifest.json"));
}

TEST_F(Cli, HttpBackendSavesTheServedBundle) {
  const auto src = synthetic("lateral", "src");
  const auto served = load_bundle(src);
  const auto archive = bundle_to_archive(served);
  httplib::Server server;
  server.Post("/reconstruct", [&](const httplib::Request&, httplib::Response& res) {
    res.set_content(std::string(archive.begin(), archive.end()), "application/zip");
  });
  const int port = server.bind_to_any_port("127.0.0.1");
  std::thread thread([&] { server.listen_after_bind(); });
  server.wait_until_ready();
  const auto r = spatial_cli("reconstruct --backend http --endpoint http://127.0.0.1:" + std::to_string(port) +
                                 " --images src/images --out fetched",
                             dir());
  server.stop();
  thread.join();
  ASSERT_EQ(r.status, 0) << r.err;
  EXPECT_EQ(load_bundle(dir() / "fetched"), served);
}

TEST_F(Cli, DescribeMotionNamesAllEightSectors) {
  synthetic("eight-sector", "b");
  const auto r = spatial_cli("describe-motion --bundle b", dir());
  ASSERT_EQ(r.status, 0) << r.err;
  std::istringstream lines(r.out);
  std::vector<std::string> got;
  for (std::string line; std::getline(lines, line);) got.push_back(line);
  ASSERT_EQ(got.size(), 8u);
  const char* labels[] = {"forward", "forward-right", "right", "backward-right",
                          "backward", "backward-left", "left", "forward-left"};
  for (int i = 0; i < 8; ++i) {
    EXPECT_NE(got[i].find("moved " + std::string(labels[i]) + " ("), std::string::npos) << got[i];
  }
}

TEST_F(Cli, DescribeMotionUnitsAndErrors) {
  synthetic("lateral", "m", "--units metric-meters");
  const auto metric = spatial_cli("describe-motion --bundle m", dir());
  ASSERT_EQ(metric.status, 0) << metric.err;
  EXPECT_NE(metric.out.find("meters)"), std::string::npos) << metric.out;

  auto one = load_bundle(dir() / "m");
  one.frames.resize(1);
  save_bundle(one, dir() / "one");
  const auto r = spatial_cli("describe-motion --bundle one", dir());
  EXPECT_EQ(r.status, 1);
  EXPECT_TRUE(r.out.empty());
  EXPECT_NE(r.err.find("insufficient-views"), std::string::npos) << r.err;
}

TEST_F(Cli, RenderAppliesOpsInFlagOrder) {
  synthetic("orbit", "b");
  ASSERT_EQ(spatial_cli("render --bundle b --pose-from 1 --out self.png", dir()).status, 0);
  ASSERT_EQ(spatial_cli("render --bundle b --pose-from 1 --turn-around --turn-around --out twice.png", dir()).status, 0);
  EXPECT_EQ(read_text(dir() / "self.png"), read_text(dir() / "twice.png"));

  const auto a = spatial_cli("render --bundle b --rotate-right 20 --move-forward 0.5 --out a.png", dir());
  const auto c = spatial_cli("render --bundle b --move-forward 0.5 --rotate-right 20 --out c.png", dir());
  ASSERT_EQ(a.status, 0);
  ASSERT_EQ(c.status, 0);
  EXPECT_GT(json::parse(a.out)["coverage"].get<double>(), 0.5);
  EXPECT_GT(json::parse(c.out)["coverage"].get<double>(), 0.5);
  EXPECT_NE(read_text(dir() / "a.png"), read_text(dir() / "c.png"));

  // a bare flag takes the documented default step
  ASSERT_EQ(spatial_cli("render --bundle b --rotate-right --out d1.png", dir()).status, 0);
  ASSERT_EQ(spatial_cli("render --bundle b --rotate-right 45 --out d2.png", dir()).status, 0);
  EXPECT_EQ(read_text(dir() / "d1.png"), read_text(dir() / "d2.png"));

  const auto out_of_range = spatial_cli("render --bundle b --pose-from 9 --out e.png", dir());
  EXPECT_EQ(out_of_range.status, 1);
  EXPECT_FALSE(fs::exists(dir() / "e.png"));
}

TEST_F(Cli, ConfigFileOverlaysFlags) {
  synthetic("orbit", "b");
  std::ofstream(dir() / "render.ini") << "[render]\npose-from = 2\npoint-radius = 1\n";
  ASSERT_EQ(spatial_cli("render --bundle b --pose-from 2 --point-radius 1 --rotate-right 30 --out flags.png", dir()).status,
            0);
  const auto r = spatial_cli("--config render.ini render --bundle b --rotate-right 30 --out config.png", dir());
  ASSERT_EQ(r.status, 0) << r.err;
  EXPECT_EQ(read_text(dir() / "flags.png"), read_text(dir() / "config.png"));
  // the command line wins over the file
  ASSERT_EQ(spatial_cli("render --bundle b --pose-from 0 --point-radius 1 --out zero.png", dir()).status, 0);
  ASSERT_EQ(spatial_cli("--config render.ini render --bundle b --pose-from 0 --out over.png", dir()).status, 0);
  EXPECT_EQ(read_text(dir() / "zero.png"), read_text(dir() / "over.png"));

  std::ofstream(dir() / "ops.ini") << "[render]\nrotate-right = 30\n";
  EXPECT_EQ(spatial_cli("--config ops.ini render --bundle b --out ops.png", dir()).status, 2);
}

TEST_F(Cli, RunProgramMatchesDescribeMotion) {
  synthetic("eight-sector", "b");
  const auto direct = spatial_cli("describe-motion --bundle b", dir());
  const auto program = spatial_cli(
      "run-program " + quote(fixture_path("programs/problem1.spl").string()) + " --bundle b --trace t.jsonl", dir());
  ASSERT_EQ(program.status, 0) << program.err;
  EXPECT_EQ(program.out, direct.out);
  EXPECT_NE(read_text(dir() / "t.jsonl").find("pySpatial.describe_camera_motion"), std::string::npos);
}

TEST_F(Cli, RunProgramWritesNumberedViews) {
  synthetic("orbit", "b");
  const auto r = spatial_cli(
      "run-program " + quote(fixture_path("programs/problem2.spl").string()) + " --bundle b --out-dir views --json",
      dir());
  ASSERT_EQ(r.status, 0) << r.err;
  const auto j = json::parse(r.out);
  EXPECT_EQ(j["kind"], "image_list");
  EXPECT_EQ(j["images"].size(), 2u);
  EXPECT_TRUE(fs::exists(dir() / "views" / "view_00.png"));
  EXPECT_TRUE(fs::exists(dir() / "views" / "view_01.png"));
  EXPECT_EQ(j["trace"].size(), 5u);
}

TEST_F(Cli, RunProgramLocatesErrors) {
  synthetic("orbit", "b");
  std::ofstream(dir() / "bad.spl") << "def program(input_scene):\n    while True:\n        pass\n";
  const auto r = spatial_cli("run-program bad.spl --bundle b", dir());
  EXPECT_EQ(r.status, 1);
  EXPECT_TRUE(r.out.empty());
  EXPECT_NE(r.err.find("bad.spl:2:5: "), std::string::npos) << r.err;
  EXPECT_NE(r.err.find("forbidden-construct"), std::string::npos) << r.err;
}

class CliBench : public Cli {
 protected:
  void SetUp() override { testing::materialize_scenes(fixture_path("bench/mini/scenes.json"), dir() / "root"); }

  std::string first_question() const {
    std::ifstream in(fixture_path("bench/mini/dataset.jsonl"));
    std::string line;
    std::getline(in, line);
    return json::parse(line)["question"];
  }

  std::string bench_args(const std::string& out) const {
    return "bench --dataset " + quote(fixture_path("bench/mini/dataset.jsonl").string()) +
           " --images-root root --bundles-root root --mock " + quote(fixture_path("bench/mini/mock.jsonl").string()) +
           " --no-timings --out " + out;
  }
};

TEST_F(CliBench, AskReplaysDeterministically) {
  const std::string args = "ask --images root/lateral-bookshelf/images --question " + quote(first_question()) +
                           " --bundle root/lateral-bookshelf --mock " +
                           quote(fixture_path("bench/mini/mock.jsonl").string()) + " --trace trace.jsonl";
  const auto a = spatial_cli(args, dir());
  const auto b = spatial_cli(args, dir());
  ASSERT_EQ(a.status, 0) << a.err;
  const auto ja = json::parse(a.out);
  EXPECT_EQ(without_timings(ja), without_timings(json::parse(b.out)));
  EXPECT_EQ(ja["choice"]["value"], "B");
  EXPECT_EQ(ja["stage"], "with_clue");
  EXPECT_NE(ja["program"].get<std::string>().find("describe_camera_motion"), std::string::npos);
  EXPECT_EQ(ja["trace_path"], "trace.jsonl");
  EXPECT_TRUE(fs::exists(dir() / "trace.jsonl"));
}

TEST_F(CliBench, AskFallsBackWhenCodegenFails) {
  const auto r = spatial_cli("ask --images root/lateral-bookshelf/images --question " + quote(first_question()) +
                                 " --bundle root/lateral-bookshelf --mock " +
                                 quote(fixture_path("cli/ask_fallback.jsonl").string()),
                             dir());
  ASSERT_EQ(r.status, 0) << r.err;
  const auto j = json::parse(r.out);
  EXPECT_EQ(j["stage"], "without_clue");
  EXPECT_EQ(j["failure"], "program-generation");
  EXPECT_EQ(j["choice"]["value"], "B");
  EXPECT_NE(j["failure_message"].get<std::string>().find("after 3 request(s)"), std::string::npos);
}

TEST_F(CliBench, BenchScoresTheFixture) {
  const auto r = spatial_cli(bench_args("report.json"), dir());
  ASSERT_EQ(r.status, 0) << r.err;
  EXPECT_NE(r.out.find("Overall    Rotation   Among      Around"), std::string::npos) << r.out;
  const auto report = json::parse(read_text(dir() / "report.json"));
  EXPECT_EQ(report["overall"], 1.0);
  EXPECT_EQ(report["items"], 10);
  EXPECT_TRUE(fs::exists(dir() / "report.results.jsonl"));
}

TEST_F(CliBench, BenchResumeMatchesUninterrupted) {
  ASSERT_EQ(spatial_cli(bench_args("full.json"), dir()).status, 0);
  ASSERT_EQ(spatial_cli(bench_args("part.json") + " --limit 5 --parallelism 2", dir()).status, 0);
  const auto resumed = spatial_cli(bench_args("part.json") + " --resume", dir());
  ASSERT_EQ(resumed.status, 0) << resumed.err;
  EXPECT_EQ(read_text(dir() / "full.json"), read_text(dir() / "part.json"));
}

TEST_F(CliBench, BenchRejectsBadFieldOverride) {
  const auto r = spatial_cli(bench_args("x.json") + " --field colour=hue", dir());
  EXPECT_EQ(r.status, 2);
  const auto missing = spatial_cli(bench_args("x.json") + " --field images=pictures", dir());
  EXPECT_EQ(missing.status, 1);
  EXPECT_NE(missing.err.find("dataset-parse"), std::string::npos) << missing.err;
}

}  // namespace
}  // namespace spatial
