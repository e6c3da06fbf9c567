#include "maskfuse/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "maskfuse/error.hpp"
#include "maskfuse/formats.hpp"
#include "maskfuse/random.hpp"

namespace maskfuse {

std::optional<ClassId> SegmentationResult::class_of(MaskRef ref) const {
  for (std::size_t c = 1; c < classes.size(); ++c)
    if (std::binary_search(classes[c].begin(), classes[c].end(), ref)) return static_cast<ClassId>(c);
  if (std::binary_search(consumed.begin(), consumed.end(), ref)) return kBackgroundClass;
  return std::nullopt;
}

namespace {

std::optional<std::vector<LabelMap>> background_maps(const Scene& scene, const PipelineConfig& config) {
  if (config.background_mask_paths.empty()) return scene.background_masks;
  if (config.background_mask_paths.size() != scene.size())
    throw Error("background_mask_paths must list one mask per image");
  std::vector<LabelMap> maps;
  for (std::size_t i = 0; i < scene.size(); ++i) {
    LabelMap m = read_labelmap(config.background_mask_paths[i]);
    if (m.width() != scene.images[i].width || m.height() != scene.images[i].height)
      throw Error("background mask dimensions do not match image " + std::to_string(i));
    maps.push_back(std::move(m));
  }
  return maps;
}

}  // namespace

std::vector<PixelMask> extract_background(const Scene& scene, const PipelineConfig& config) {
  config.validate();
  const Eigen::Vector3d origin =
      config.workspace_origin ? *config.workspace_origin : scene.images.at(0).pose.position();
  const auto marked = background_maps(scene, config);
  const double reach2 = config.reach_radius * config.reach_radius;

  std::vector<PixelMask> out(scene.size());
  for (std::size_t i = 0; i < scene.size(); ++i) {
    const LabelMap& labels = scene.label_maps[i];
    const PointMap& pm = scene.pointmaps[i];
    PixelMask& bg = out[i];
    bg.assign(labels.size(), 0);
    for (std::size_t k = 0; k < labels.size(); ++k) {
      const double d2 = (pm.points[k].cast<double>() - origin).squaredNorm();
      // A non-finite point can never be shown to be within reach.
      const bool far = !(d2 <= reach2);
      bg[k] = labels[k] == 0 || far || (marked && (*marked)[i][k] != 0);
    }
  }
  return out;
}

SegmentationResult run(const Scene& scene, const PipelineConfig& config) {
  config.validate();
  scene.validate();
  const unsigned threads = config.threads;
  SegmentationResult result;
  StageReport& report = result.report;

  const auto background = extract_background(scene, config);
  const MaskTable masks = build_mask_table(scene, background);
  report.masks = masks.size();
  report.consumed_masks = masks.consumed.size();

  const Graph2d g2 = build_2d_graph(scene, masks, background, config.match, config.seed, threads);
  report.tau2d = g2.tau2d;
  report.used_image_pairs = g2.used_image_pairs;
  report.considered_pairs = g2.considered_pairs;
  report.clamped_ratios = g2.clamped_ratios;
  report.edges_2d = g2.graph.edge_count();

  Partition p2 = contract(g2.graph, stream_seed(config.seed, Stream::kContraction2d), threads);
  report.supervertices_2d = p2.size();

  Partition final_partition = p2;
  if (config.lift.tau3d > 0.0) {
    RefineResult refined = refine(p2, masks, scene, config.lift, config.seed, threads);
    report.edges_3d = refined.graph3d.edge_count();
    report.empty_clouds = refined.stats.empty_clouds;
    report.pruned_pairs_3d = refined.stats.pairs_pruned;
    final_partition = std::move(refined.partition);
  }

  // Supervertex ids are minimum member vertex ids and vertices follow
  // MaskRef order, so ascending ids give ascending minimum MaskRefs.
  const auto sv_ids = final_partition.supervertex_ids();
  if (sv_ids.size() + 1 > std::numeric_limits<std::uint16_t>::max() + std::size_t{1})
    throw Error("too many classes for 16-bit output maps");
  result.classes.resize(sv_ids.size() + 1);
  std::vector<ClassId> class_of_vertex(masks.size(), kBackgroundClass);
  for (std::size_t c = 0; c < sv_ids.size(); ++c) {
    for (VertexId v : final_partition.members().at(sv_ids[c])) {
      result.classes[c + 1].push_back(masks.refs[v]);
      class_of_vertex[v] = static_cast<ClassId>(c + 1);
    }
    std::sort(result.classes[c + 1].begin(), result.classes[c + 1].end());
  }
  result.consumed = masks.consumed;

  result.mhat.reserve(scene.size());
  for (std::size_t i = 0; i < scene.size(); ++i)
    result.mhat.emplace_back(scene.images[i].width, scene.images[i].height, LocalId{0});
  for (VertexId v = 0; v < masks.size(); ++v) {
    LabelMap& out = result.mhat[masks.refs[v].image];
    for (const Pixel& px : masks.pixels[v]) out.at(px.x, px.y) = static_cast<LocalId>(class_of_vertex[v]);
  }

  for (std::size_t i = 0; i < scene.size(); ++i) {
    const PointMap& pm = scene.pointmaps[i];
    const LabelMap& mh = result.mhat[i];
    for (std::size_t k = 0; k < mh.size(); ++k) {
      if (mh[k] == kBackgroundClass || pm.confidence[k] < config.lift.min_point_confidence) continue;
      result.cloud.push_back({pm.points[k], mh[k], static_cast<std::uint16_t>(i), pm.confidence[k]});
    }
  }

  result.vertex_refs = masks.refs;
  result.partition_2d = std::move(p2);
  result.partition_final = std::move(final_partition);
  return result;
}

ObjectQuery extract_object(const SegmentationResult& result, ImageIndex image, LocalId local_id) {
  const auto cls = result.class_of({image, local_id});
  if (!cls)
    throw Error("unknown mask (image " + std::to_string(image) + ", id " + std::to_string(local_id) + ")");
  ObjectQuery q;
  q.class_id = *cls;
  q.background = *cls == kBackgroundClass;
  if (q.background) return q;
  for (const auto& p : result.cloud)
    if (p.class_id == *cls) q.points.push_back(p);
  return q;
}

}  // namespace maskfuse
