#include "maskfuse/cli.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <iomanip>
#include <optional>

#include <CLI11.hpp>
#include <json.hpp>

#include "maskfuse/error.hpp"
#include "maskfuse/formats.hpp"
#include "maskfuse/metrics.hpp"
#include "maskfuse/pipeline.hpp"
#include "maskfuse/ply.hpp"
#include "maskfuse/result_io.hpp"
#include "maskfuse/synth.hpp"

namespace maskfuse {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct PipelineFlags {
  std::string config_path;
  std::optional<double> tau3d;
  std::optional<double> tau2d_percentile;
  std::optional<double> tau2d;
  std::optional<std::size_t> max_matches_per_pair;
  std::optional<double> min_match_confidence;
  std::optional<double> min_point_confidence;
  std::optional<double> reach_radius;
  std::optional<std::uint64_t> seed;
  std::optional<unsigned> threads;

  void attach(CLI::App& app) {
    app.add_option("--config", config_path, "JSON config; flags override its values");
    app.add_option("--tau3d", tau3d, "3D merge threshold, squared meters (0 disables the 3D stage)");
    app.add_option("--tau2d-percentile", tau2d_percentile, "percentile of candidate overlap ratios used as tau2d");
    app.add_option("--tau2d", tau2d, "fixed tau2d, bypassing the percentile");
    app.add_option("--max-matches-per-pair", max_matches_per_pair, "subsample cap per image pair");
    app.add_option("--min-match-confidence", min_match_confidence, "drop matches below this confidence");
    app.add_option("--min-point-confidence", min_point_confidence, "drop pointmap points below this confidence");
    app.add_option("--reach-radius", reach_radius, "workspace radius in meters");
    app.add_option("--seed", seed, "root random seed");
    app.add_option("--threads", threads, "worker threads, 0 = all cores");
  }

  PipelineConfig resolve() const {
    PipelineConfig c;
    if (!config_path.empty()) {
      json doc;
      try {
        doc = json::parse(read_file(config_path));
      } catch (const json::exception& e) {
        throw Error("config " + config_path + ": " + e.what());
      }
      c = config_from_json(doc, c);
    }
    if (tau3d) c.lift.tau3d = *tau3d;
    if (tau2d_percentile) c.match.tau2d_percentile = *tau2d_percentile;
    if (tau2d) c.match.tau2d_override = *tau2d;
    if (max_matches_per_pair) c.match.max_matches_per_pair = *max_matches_per_pair;
    if (min_match_confidence) c.match.min_match_confidence = *min_match_confidence;
    if (min_point_confidence) c.lift.min_point_confidence = *min_point_confidence;
    if (reach_radius) c.reach_radius = *reach_radius;
    if (seed) c.seed = *seed;
    if (threads) c.threads = *threads;
    c.validate();
    return c;
  }
};

std::string fixed(double v, int digits = 4) {
  std::ostringstream s;
  s << std::fixed << std::setprecision(digits) << v;
  return s.str();
}

Scene load_manifest(const std::string& path) {
  if (!fs::exists(path)) throw Error("manifest not found: " + path);
  return load_scene(path);
}

int cmd_segment(const std::string& scene_path, const std::string& out, const PipelineFlags& flags, bool debug,
                std::ostream& log) {
  const PipelineConfig config = flags.resolve();
  const auto t0 = std::chrono::steady_clock::now();
  const Scene scene = load_manifest(scene_path);
  const auto t1 = std::chrono::steady_clock::now();
  const SegmentationResult result = run(scene, config);
  const auto t2 = std::chrono::steady_clock::now();
  write_result(result, config, out, debug);
  const auto t3 = std::chrono::steady_clock::now();

  auto ms = [](auto a, auto b) { return std::chrono::duration<double, std::milli>(b - a).count(); };
  const StageReport& r = result.report;
  log << "classes: " << result.foreground_class_count() << " (from " << r.masks << " masks, " << r.consumed_masks
      << " consumed)\n";
  log << "tau2d " << fixed(r.tau2d) << ", 2d edges " << r.edges_2d << ", supervertices " << r.supervertices_2d
      << ", 3d edges " << r.edges_3d << "\n";
  log << "time: load " << fixed(ms(t0, t1), 1) << " ms, run " << fixed(ms(t1, t2), 1) << " ms, write "
      << fixed(ms(t2, t3), 1) << " ms\n";
  return 0;
}

std::vector<LabelMap> read_class_maps(const fs::path& dir, std::size_t expected) {
  if (!fs::is_directory(dir)) throw Error("prediction directory not found: " + dir.string());
  std::vector<LabelMap> maps;
  for (std::size_t i = 0; i < expected; ++i) {
    const fs::path p = dir / ("mhat_" + std::to_string(i) + ".pgm");
    if (!fs::exists(p)) throw Error("missing class map " + p.string());
    maps.push_back(read_labelmap(p));
  }
  if (fs::exists(dir / ("mhat_" + std::to_string(expected) + ".pgm")))
    throw Error("prediction has more class maps than the scene has images");
  return maps;
}

int cmd_eval(const std::string& scene_path, const std::string& pred, std::string out, unsigned threads,
             std::ostream& log) {
  const Scene scene = load_manifest(scene_path);
  if (!scene.ground_truth) throw Error("scene has no ground truth maps: " + scene_path);
  const auto mhat = read_class_maps(pred, scene.size());
  const metrics::MetricsReport report = metrics::evaluate(mhat, scene, threads);
  if (out.empty()) out = pred;
  fs::create_directories(out);
  write_file(fs::path(out) / "metrics.json", metrics::to_json(report).dump(2) + "\n");

  log << "iou f1 d_chamfer iou_sel\n";
  log << fixed(report.mean_iou) << ' ' << fixed(report.mean_f1) << ' ' << fixed(report.mean_chamfer, 6) << ' '
      << fixed(report.mean_iou_sel) << '\n';
  log << "precision " << fixed(report.mean_precision) << ", pixel utility " << fixed(report.pixel_utility_mean)
      << ", foreground classes " << report.foreground_classes << '\n';
  for (const auto& d : report.diagnostics) log << "diagnostic: " << d << '\n';
  return 0;
}

struct SynthFlags {
  std::string spec_path;
  std::optional<int> objects;
  std::optional<int> views;
  std::optional<int> overseg;
  std::optional<std::uint64_t> seed;
  std::optional<double> dropout;
  std::optional<double> spurious;
  std::optional<double> noise;
  std::optional<int> width;
  std::optional<int> height;
  unsigned threads = 0;
};

int cmd_synth(const SynthFlags& f, const std::string& out, std::ostream& log) {
  synth::SynthSpec spec;
  if (!f.spec_path.empty()) {
    try {
      spec = synth::spec_from_json(json::parse(read_file(f.spec_path)));
    } catch (const json::exception& e) {
      throw Error("synth spec " + f.spec_path + ": " + e.what());
    }
  }
  if (f.objects) spec.n_objects = *f.objects;
  if (f.views) spec.n_views = *f.views;
  if (f.overseg) spec.overseg_k = *f.overseg;
  if (f.seed) spec.seed = *f.seed;
  if (f.dropout) spec.match_dropout = *f.dropout;
  if (f.spurious) spec.spurious_rate = *f.spurious;
  if (f.noise) spec.pointmap_noise_sigma = *f.noise;
  if (f.width) spec.width = *f.width;
  if (f.height) spec.height = *f.height;
  spec.validate();

  const synth::SynthScene s = synth::generate(spec, f.threads);
  const fs::path manifest = synth::write_synth(s, out);
  std::size_t masks = 0;
  std::size_t matches = 0;
  for (const auto& m : s.scene.label_maps) masks += m.mask_ids().size();
  for (const auto& c : s.scene.correspondences) matches += c.matches.size();
  log << "wrote " << manifest.string() << ": " << spec.n_views << " views, " << masks << " masks, " << matches
      << " matches\n";
  return 0;
}

int cmd_export(const std::string& result_dir, ImageIndex image, LocalId mask, const std::string& out,
               std::ostream& log) {
  const SegmentationResult result = read_result(result_dir);
  const ObjectQuery q = extract_object(result, image, mask);
  write_ply(q.points, out);
  if (q.background) {
    log << "mask (" << image << ", " << mask << ") belongs to the background; wrote an empty cloud\n";
  } else {
    log << "class " << q.class_id << ": " << q.points.size() << " points\n";
  }
  return 0;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& log) {
  CLI::App app{"Multi-view mask fusion into consistent object segments"};
  app.require_subcommand(1);

  auto* segment = app.add_subcommand("segment", "fuse per-view masks into global object classes");
  std::string scene_path;
  std::string out;
  bool no_debug = false;
  PipelineFlags pipeline_flags;
  segment->add_option("--scene", scene_path, "scene manifest")->required();
  segment->add_option("--out", out, "output directory")->required();
  segment->add_flag("--no-debug", no_debug, "skip partition_debug.json");
  pipeline_flags.attach(*segment);

  auto* eval = app.add_subcommand("eval", "score a segmentation against ground truth");
  std::string pred;
  std::string eval_out;
  unsigned eval_threads = 0;
  eval->add_option("--scene", scene_path, "scene manifest with ground truth")->required();
  eval->add_option("--pred", pred, "segment output directory")->required();
  eval->add_option("--out", eval_out, "directory for metrics.json (default: --pred)");
  eval->add_option("--threads", eval_threads, "worker threads, 0 = all cores");

  auto* synth_cmd = app.add_subcommand("synth", "generate a synthetic tabletop scene");
  SynthFlags sf;
  synth_cmd->add_option("--spec", sf.spec_path, "JSON synth spec; flags override its values");
  synth_cmd->add_option("--objects", sf.objects, "number of objects");
  synth_cmd->add_option("--views", sf.views, "number of ring views");
  synth_cmd->add_option("--overseg", sf.overseg, "max fragments per object mask");
  synth_cmd->add_option("--seed", sf.seed, "random seed");
  synth_cmd->add_option("--dropout", sf.dropout, "fraction of true matches removed");
  synth_cmd->add_option("--spurious", sf.spurious, "wrong matches added, as a fraction of kept matches");
  synth_cmd->add_option("--noise", sf.noise, "pointmap noise sigma, meters");
  synth_cmd->add_option("--width", sf.width, "image width");
  synth_cmd->add_option("--height", sf.height, "image height");
  synth_cmd->add_option("--threads", sf.threads, "worker threads, 0 = all cores");
  synth_cmd->add_option("--out", out, "scene directory")->required();

  auto* export_cmd = app.add_subcommand("export-object", "write the point cloud of one mask's class");
  std::string result_dir;
  ImageIndex image = 0;
  LocalId mask = 0;
  export_cmd->add_option("--result", result_dir, "segment output directory")->required();
  export_cmd->add_option("--image", image, "image index")->required();
  export_cmd->add_option("--mask", mask, "local mask id")->required();
  export_cmd->add_option("--out", out, "PLY path")->required();

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, log, log);
    return code == 0 ? 0 : 1;
  }

  try {
    if (segment->parsed()) return cmd_segment(scene_path, out, pipeline_flags, !no_debug, log);
    if (eval->parsed()) return cmd_eval(scene_path, pred, eval_out, eval_threads, log);
    if (synth_cmd->parsed()) return cmd_synth(sf, out, log);
    if (export_cmd->parsed()) return cmd_export(result_dir, image, mask, out, log);
  } catch (const Error& e) {
    log << "error: " << e.what() << '\n';
    return 1;
  } catch (const fs::filesystem_error& e) {
    log << "error: " << e.what() << '\n';
    return 1;
  } catch (const InvariantError& e) {
    log << "internal error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    log << "internal error: " << e.what() << '\n';
    return 2;
  }
  return 1;
}

}  // namespace maskfuse
