#include <doctest.h>

#include <sstream>

#include <json.hpp>

#include "maskfuse/cli.hpp"
#include "maskfuse/formats.hpp"
#include "maskfuse/metrics.hpp"
#include "maskfuse/result_io.hpp"
#include "support.hpp"

using namespace maskfuse;
namespace fs = std::filesystem;
using testsupport::TempDir;

namespace {

struct Run {
  int code;
  std::string log;
};

Run cli(std::vector<std::string> args) {
  std::ostringstream log;
  const int code = run_cli(args, log);
  return {code, log.str()};
}

std::map<std::string, std::string> dir_contents(const fs::path& dir) {
  std::map<std::string, std::string> out;
  for (const auto& e : fs::directory_iterator(dir)) out[e.path().filename().string()] = read_file(e.path());
  return out;
}

// A small over-segmented scene shared by the tests below.
const fs::path& scene_dir() {
  static TempDir dir("cli_scene");
  static const bool made = [] {
    const Run r = cli({"synth", "--objects", "5", "--views", "6", "--overseg", "3", "--seed", "7", "--out",
                       dir.path().string()});
    REQUIRE(r.code == 0);
    return true;
  }();
  (void)made;
  return dir.path();
}

std::string manifest() { return (scene_dir() / "manifest.json").string(); }

}  // namespace

TEST_CASE("synth writes a loadable scene") {
  const Scene s = load_scene(manifest());
  CHECK(s.size() == 6);
  CHECK(s.ground_truth.has_value());
  CHECK(fs::exists(scene_dir() / "synth_spec.json"));
  CHECK(fs::exists(scene_dir() / "gt_5.pgm"));

  TempDir bad("cli_bad");
  CHECK(cli({"synth", "--objects", "0", "--out", bad.path().string()}).code == 1);
}

TEST_CASE("argument errors and help") {
  CHECK(cli({}).code == 1);
  CHECK(cli({"segment", "--bogus"}).code == 1);
  CHECK(cli({"--help"}).code == 0);
  const Run missing = cli({"segment", "--scene", "/nonexistent/m.json", "--out", "/tmp/unused_maskfuse_out"});
  CHECK(missing.code == 1);
  CHECK(missing.log.find("/nonexistent/m.json") != std::string::npos);
  CHECK(cli({"segment", "--scene", manifest(), "--out", "x", "--min-match-confidence", "2"}).code == 1);
}

TEST_CASE("segment is reproducible and echoes its configuration") {
  TempDir a("cli_a");
  TempDir b("cli_b");
  TempDir c("cli_c");
  REQUIRE(cli({"segment", "--scene", manifest(), "--out", a.path().string(), "--seed", "42"}).code == 0);
  REQUIRE(cli({"segment", "--scene", manifest(), "--out", b.path().string(), "--seed", "42", "--threads", "3"}).code ==
          0);
  CHECK(dir_contents(a.path()) == dir_contents(b.path()));

  const auto echo = nlohmann::json::parse(read_file(a / "config_echo.json"));
  CHECK(echo["seed"] == 42);
  REQUIRE(cli({"segment", "--scene", manifest(), "--out", c.path().string(), "--config",
               (a / "config_echo.json").string()})
              .code == 0);
  CHECK(dir_contents(a.path()) == dir_contents(c.path()));
}

TEST_CASE("tau3d 0 disables 3d merging") {
  TempDir out("cli_tau");
  REQUIRE(cli({"segment", "--scene", manifest(), "--out", out.path().string(), "--tau3d", "0"}).code == 0);
  const auto doc = nlohmann::json::parse(read_file(out / "classes.json"));
  CHECK(doc["stages"]["edges_3d"] == 0);
  CHECK(doc["config"]["tau3d"] == 0.0);
}

TEST_CASE("eval of ground truth prints a perfect row") {
  TempDir pred("cli_gt");
  const Scene s = load_scene(manifest());
  for (std::size_t i = 0; i < s.size(); ++i)
    write_labelmap((*s.ground_truth)[i], pred / ("mhat_" + std::to_string(i) + ".pgm"));
  const Run r = cli({"eval", "--scene", manifest(), "--pred", pred.path().string()});
  REQUIRE(r.code == 0);
  CHECK(r.log.find("1.0000 1.0000 0.000000 1.0000") != std::string::npos);
  CHECK(r.log.find("pixel utility 1.0000") != std::string::npos);
  CHECK(fs::exists(pred / "metrics.json"));
}

TEST_CASE("eval reports exactly what the metrics module computes") {
  TempDir out("cli_eval");
  REQUIRE(cli({"segment", "--scene", manifest(), "--out", out.path().string()}).code == 0);
  REQUIRE(cli({"eval", "--scene", manifest(), "--pred", out.path().string()}).code == 0);
  const Scene s = load_scene(manifest());
  const auto report = metrics::evaluate(read_result(out.path()).mhat, s);
  CHECK(read_file(out / "metrics.json") == metrics::to_json(report).dump(2) + "\n");
}

TEST_CASE("eval rejects shape mismatches and all-background predictions are scored") {
  TempDir pred("cli_shape");
  const Scene s = load_scene(manifest());
  for (std::size_t i = 0; i < s.size(); ++i)
    write_labelmap(LabelMap(4, 4), pred / ("mhat_" + std::to_string(i) + ".pgm"));
  CHECK(cli({"eval", "--scene", manifest(), "--pred", pred.path().string()}).code == 1);

  for (std::size_t i = 0; i < s.size(); ++i)
    write_labelmap(LabelMap(s.images[i].width, s.images[i].height), pred / ("mhat_" + std::to_string(i) + ".pgm"));
  const Run r = cli({"eval", "--scene", manifest(), "--pred", pred.path().string()});
  CHECK(r.code == 0);
  CHECK(r.log.find("0.0000 0.0000") != std::string::npos);
  CHECK(r.log.find("diagnostic:") != std::string::npos);
}

TEST_CASE("export-object gives one cloud per class") {
  TempDir out("cli_export");
  REQUIRE(cli({"segment", "--scene", manifest(), "--out", out.path().string()}).code == 0);
  const SegmentationResult r = read_result(out.path());
  bool found = false;
  for (std::size_t c = 1; c < r.classes.size() && !found; ++c) {
    const auto& members = r.classes[c];
    for (std::size_t i = 0; i + 1 < members.size() && !found; ++i) {
      if (members[i].image != members[i + 1].image) continue;
      found = true;
      const auto img = std::to_string(members[i].image);
      REQUIRE(cli({"export-object", "--result", out.path().string(), "--image", img, "--mask",
                   std::to_string(members[i].local_id), "--out", (out / "a.ply").string()})
                  .code == 0);
      REQUIRE(cli({"export-object", "--result", out.path().string(), "--image", img, "--mask",
                   std::to_string(members[i + 1].local_id), "--out", (out / "b.ply").string()})
                  .code == 0);
      CHECK(read_file(out / "a.ply") == read_file(out / "b.ply"));
    }
  }
  CHECK(found);
  CHECK(cli({"export-object", "--result", out.path().string(), "--image", "0", "--mask", "999", "--out",
             (out / "c.ply").string()})
            .code == 1);
  const Run bg = cli({"export-object", "--result", out.path().string(), "--image", "0", "--mask", "1", "--out",
                      (out / "d.ply").string()});
  CHECK(bg.code == 0);
  CHECK(bg.log.find("background") != std::string::npos);
}
