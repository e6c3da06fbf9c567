#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Core>
#include <json.hpp>

#include "maskfuse/contraction.hpp"
#include "maskfuse/lift3d.hpp"
#include "maskfuse/match2d.hpp"
#include "maskfuse/scene.hpp"

namespace maskfuse {

using ClassId = std::uint32_t;
inline constexpr ClassId kBackgroundClass = 0;

struct PipelineConfig {
  Match2dConfig match;
  Lift3dConfig lift;
  double reach_radius = 1.5;  // meters from the workspace origin
  // Defaults to the first camera's position.
  std::optional<Eigen::Vector3d> workspace_origin;
  // Per-image background masks; when set they replace the manifest's.
  std::vector<std::string> background_mask_paths;
  std::uint64_t seed = 0;
  // Execution only: never changes results and is not echoed.
  unsigned threads = 0;

  void validate() const;
};

// Fully resolved configuration, without the thread count.
nlohmann::ordered_json config_to_json(const PipelineConfig& config);
// Keys absent from `doc` keep their value from `base`. Unknown keys are rejected.
PipelineConfig config_from_json(const nlohmann::json& doc, PipelineConfig base = {});

struct LabeledPoint {
  Eigen::Vector3f point;
  std::uint16_t class_id = 0;
  std::uint16_t source_image = 0;
  float confidence = 0.0f;
};

struct StageReport {
  double tau2d = 0.0;
  std::size_t masks = 0;
  std::size_t consumed_masks = 0;
  std::size_t used_image_pairs = 0;
  std::size_t considered_pairs = 0;
  std::size_t clamped_ratios = 0;
  std::size_t edges_2d = 0;
  std::size_t supervertices_2d = 0;
  std::size_t edges_3d = 0;
  std::size_t empty_clouds = 0;
  std::size_t pruned_pairs_3d = 0;
};

struct SegmentationResult {
  // classes[c] lists the member masks of class c; classes[0] (background) is empty.
  std::vector<std::vector<MaskRef>> classes;
  // Masks whose every pixel went to the background class.
  std::vector<MaskRef> consumed;
  std::vector<LabelMap> mhat;  // per-image global class maps
  std::vector<LabeledPoint> cloud;

  // Stage diagnostics; not needed to reload a result.
  StageReport report;
  std::optional<Partition> partition_2d;
  std::optional<Partition> partition_final;
  std::vector<MaskRef> vertex_refs;

  std::size_t foreground_class_count() const { return classes.empty() ? 0 : classes.size() - 1; }
  // Class of a foreground mask, background for consumed masks, nullopt if unknown.
  std::optional<ClassId> class_of(MaskRef ref) const;
};

// Per-image pixel masks (nonzero = background): pixels with label 0, pixels
// whose point lies farther than reach_radius from the workspace origin, and
// pixels marked in a background mask.
std::vector<PixelMask> extract_background(const Scene& scene, const PipelineConfig& config);

SegmentationResult run(const Scene& scene, const PipelineConfig& config);

struct ObjectQuery {
  bool background = false;
  ClassId class_id = kBackgroundClass;
  std::vector<LabeledPoint> points;
};

// The merged-cloud points of the class containing (image, local_id).
// Throws Error if the mask does not exist.
ObjectQuery extract_object(const SegmentationResult& result, ImageIndex image, LocalId local_id);

}  // namespace maskfuse
