#include <doctest.h>

#include <json.hpp>

#include "maskfuse/error.hpp"
#include "maskfuse/formats.hpp"
#include "maskfuse/metrics.hpp"
#include "maskfuse/pipeline.hpp"
#include "maskfuse/result_io.hpp"
#include "maskfuse/synth.hpp"
#include "support.hpp"

using namespace maskfuse;
namespace fs = std::filesystem;

namespace {

synth::SynthSpec small_spec(std::uint64_t seed) {
  synth::SynthSpec s;
  s.width = 160;
  s.height = 120;
  s.focal_px = 130.0;
  s.seed = seed;
  return s;
}

std::map<std::string, std::string> dir_contents(const fs::path& dir) {
  std::map<std::string, std::string> out;
  for (const auto& e : fs::directory_iterator(dir)) out[e.path().filename().string()] = read_file(e.path());
  return out;
}

}  // namespace

TEST_CASE("config json round trip and validation") {
  PipelineConfig c;
  c.lift.tau3d = 1e-3;
  c.match.tau2d_override = 0.3;
  c.workspace_origin = Eigen::Vector3d(1, 2, 3);
  c.seed = 77;
  c.threads = 5;
  const auto j = config_to_json(c);
  CHECK_FALSE(j.contains("threads"));
  const PipelineConfig back = config_from_json(nlohmann::json::parse(j.dump()));
  CHECK(config_to_json(back) == j);
  CHECK(back.threads == 0);

  CHECK_THROWS_AS(config_from_json(nlohmann::json{{"tau_3d", 1.0}}), Error);
  CHECK_THROWS_AS(config_from_json(nlohmann::json{{"reach_radius", -1.0}}), Error);
  CHECK_THROWS_AS(config_from_json(nlohmann::json{{"min_match_confidence", "high"}}), Error);
}

TEST_CASE("background extraction rules") {
  Scene s = testsupport::blank_scene(1, 3, 1);
  s.label_maps[0] = LabelMap(3, 1, std::vector<LocalId>{0, 1, 1});
  s.pointmaps[0].points[1] = {3.0f, 0.0f, 0.0f};
  s.pointmaps[0].points[2] = {0.5f, 0.0f, 0.0f};
  PipelineConfig c;
  c.reach_radius = 1.2;
  c.workspace_origin = Eigen::Vector3d::Zero();
  const auto bg = extract_background(s, c);
  CHECK(bg[0] == PixelMask{1, 1, 0});

  s.pointmaps[0].points[2] = {std::nanf(""), 0.0f, 0.0f};
  CHECK(extract_background(s, c)[0][2] == 1);
}

TEST_CASE("background on a synthetic scene is table plus far points") {
  const auto synth = synth::generate(small_spec(1));
  const auto bg = extract_background(synth.scene, PipelineConfig{});
  for (std::size_t i = 0; i < synth.scene.size(); ++i) {
    const auto& v = synth.views[i];
    for (std::size_t k = 0; k < v.points.size(); ++k) {
      const bool expected = v.surface[k] != synth::Surface::kObject;
      CHECK(static_cast<bool>(bg[i][k]) == expected);
    }
  }
}

TEST_CASE("no matches and no 3d stage keep every mask separate") {
  auto spec = small_spec(2);
  spec.overseg_k = 3;
  auto synth = synth::generate(spec);
  synth.scene.correspondences.clear();
  PipelineConfig c;
  c.lift.tau3d = 0.0;
  const SegmentationResult r = run(synth.scene, c);
  CHECK(r.foreground_class_count() == r.report.masks);
  CHECK(r.report.edges_2d == 0);
  CHECK(r.report.edges_3d == 0);
}

TEST_CASE("exact over-segmented scene recovers every object") {
  for (int k : {2, 3, 4}) {
    auto spec = small_spec(10 + k);
    spec.overseg_k = k;
    const auto synth = synth::generate(spec);
    PipelineConfig c;
    c.seed = 5;
    const SegmentationResult r = run(synth.scene, c);
    REQUIRE(r.foreground_class_count() == 5);
    // Each class's pixels equal exactly one object's pixels.
    std::map<LocalId, LocalId> class_to_object;
    for (std::size_t i = 0; i < synth.scene.size(); ++i) {
      const auto& gt = (*synth.scene.ground_truth)[i];
      for (std::size_t p = 0; p < gt.size(); ++p) {
        const LocalId c_id = r.mhat[i][p];
        CHECK((c_id == 0) == (gt[p] == 0));
        if (c_id == 0) continue;
        auto [it, inserted] = class_to_object.emplace(c_id, gt[p]);
        CHECK(it->second == gt[p]);
      }
    }
    CHECK(class_to_object.size() == 5);
  }
}

TEST_CASE("noisy scene keeps per-object IoU above 0.9") {
  auto spec = small_spec(3);
  spec.overseg_k = 3;
  spec.match_dropout = 0.2;
  spec.spurious_rate = 0.05;
  const auto synth = synth::generate(spec);
  const SegmentationResult r = run(synth.scene, PipelineConfig{});
  const auto report = metrics::evaluate(r.mhat, synth.scene);
  for (const auto& o : report.objects) CHECK(o.iou >= 0.9);
}

TEST_CASE("class ids follow ascending minimum mask") {
  auto spec = small_spec(4);
  spec.overseg_k = 3;
  const SegmentationResult r = run(synth::generate(spec).scene, PipelineConfig{});
  for (std::size_t c = 2; c < r.classes.size(); ++c) CHECK(r.classes[c - 1].front() < r.classes[c].front());
  CHECK(r.classes[0].empty());
}

TEST_CASE("class pixels cover every image exactly") {
  auto spec = small_spec(6);
  spec.n_views = 3;
  spec.overseg_k = 4;
  const auto synth = synth::generate(spec);
  const SegmentationResult r = run(synth.scene, PipelineConfig{});
  for (std::size_t i = 0; i < r.mhat.size(); ++i) {
    std::map<LocalId, std::size_t> per_class;
    for (LocalId v : r.mhat[i].labels()) ++per_class[v];
    std::size_t total = 0;
    for (const auto& [_, n] : per_class) total += n;
    CHECK(total == static_cast<std::size_t>(spec.width * spec.height));
    for (const auto& [cls, _] : per_class) CHECK(cls < r.classes.size());
  }
}

TEST_CASE("extract_object") {
  auto spec = small_spec(7);
  spec.overseg_k = 4;
  const auto synth = synth::generate(spec);
  const SegmentationResult r = run(synth.scene, PipelineConfig{});

  // Fragment equivalence: every member of a class yields the same cloud.
  for (std::size_t c = 1; c < r.classes.size(); ++c) {
    const auto first = extract_object(r, r.classes[c].front().image, r.classes[c].front().local_id);
    CHECK(first.class_id == c);
    CHECK_FALSE(first.points.empty());
    for (const auto& ref : r.classes[c]) {
      const auto q = extract_object(r, ref.image, ref.local_id);
      REQUIRE(q.points.size() == first.points.size());
      for (std::size_t i = 0; i < q.points.size(); ++i) CHECK(q.points[i].point == first.points[i].point);
    }
  }

  // Table masks are consumed by the background.
  const auto table = extract_object(r, 0, 1);
  CHECK(table.background);
  CHECK(table.points.empty());
  CHECK_THROWS_AS(extract_object(r, 0, 999), Error);
  CHECK_THROWS_AS(extract_object(r, 40, 1), Error);
}

TEST_CASE("single-mask class returns that mask's points") {
  Scene s = testsupport::blank_scene(1, 3, 1);
  s.label_maps[0] = LabelMap(3, 1, std::vector<LocalId>{4, 4, 6});
  s.pointmaps[0].points = {{0.1f, 0, 0}, {0.2f, 0, 0}, {0.3f, 0, 0}};
  PipelineConfig c;
  c.lift.tau3d = 0.0;
  const SegmentationResult r = run(s, c);
  const auto q = extract_object(r, 0, 4);
  REQUIRE(q.points.size() == 2);
  CHECK(q.points[0].point.x() == 0.1f);
  CHECK(q.points[1].point.x() == 0.2f);
}

TEST_CASE("results are byte-identical across runs and thread counts") {
  auto spec = small_spec(8);
  spec.overseg_k = 3;
  spec.match_dropout = 0.1;
  spec.spurious_rate = 0.05;
  spec.pointmap_noise_sigma = 0.002;
  const auto synth = synth::generate(spec);
  PipelineConfig c;
  c.seed = 42;
  c.match.max_matches_per_pair = 800;
  testsupport::TempDir a("run_a");
  testsupport::TempDir b("run_b");
  c.threads = 1;
  write_result(run(synth.scene, c), c, a.path());
  c.threads = 6;
  write_result(run(synth.scene, c), c, b.path());
  CHECK(dir_contents(a.path()) == dir_contents(b.path()));
}

TEST_CASE("result directory round trip") {
  auto spec = small_spec(9);
  spec.overseg_k = 2;
  const auto synth = synth::generate(spec);
  const SegmentationResult r = run(synth.scene, PipelineConfig{});
  testsupport::TempDir dir("result");
  write_result(r, PipelineConfig{}, dir.path());
  const SegmentationResult back = read_result(dir.path());
  CHECK(back.classes == r.classes);
  CHECK(back.consumed == r.consumed);
  CHECK(back.mhat == r.mhat);
  REQUIRE(back.cloud.size() == r.cloud.size());
  for (std::size_t i = 0; i < r.cloud.size(); i += 97) CHECK(back.cloud[i].point == r.cloud[i].point);
  CHECK(fs::exists(dir / "config_echo.json"));
  CHECK(fs::exists(dir / "partition_debug.json"));
  CHECK_THROWS_AS(read_result(dir / "missing"), Error);
}
