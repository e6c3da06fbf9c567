#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>
#include <json.hpp>

#include "maskfuse/pipeline.hpp"
#include "maskfuse/scene.hpp"

namespace maskfuse::metrics {

// Set operations take sorted, duplicate-free element lists.
using Element = std::uint64_t;

// (image << 32) | row-major pixel offset; sorts by image, then row-major.
inline Element pixel_key(ImageIndex image, std::size_t offset) {
  return (static_cast<Element>(image) << 32) | static_cast<Element>(offset);
}

std::size_t intersection_size(std::span<const Element> a, std::span<const Element> b);

// |A ∩ B| / |A ∪ B|. Throws Error when both sets are empty.
double iou(std::span<const Element> a, std::span<const Element> b);
// 2|A ∩ B| / (|A| + |B|). Throws Error when both sets are empty.
double f1(std::span<const Element> a, std::span<const Element> b);
// |pred ∩ gt| / |pred|. Throws Error on an empty prediction.
double precision(std::span<const Element> pred, std::span<const Element> gt);

// Sum over both directions of squared nearest-neighbor distances
// (unnormalized). Throws Error if either set is empty.
double symmetric_chamfer(std::span<const Eigen::Vector3d> s, std::span<const Eigen::Vector3d> t);

struct ObjectMatchReport {
  std::uint32_t object_id = 0;     // ground-truth id
  std::size_t object_pixels = 0;
  ClassId iou_class = kBackgroundClass;      // highest IoU
  ClassId chamfer_class = kBackgroundClass;  // lowest symmetric Chamfer
  double iou = 0.0;
  double f1 = 0.0;
  double chamfer = 0.0;
  double iou_sel = 0.0;
  double precision = 0.0;
};

struct MetricsReport {
  std::vector<ObjectMatchReport> objects;
  double mean_iou = 0.0;
  double mean_f1 = 0.0;
  double mean_chamfer = 0.0;
  double mean_iou_sel = 0.0;
  double mean_precision = 0.0;
  std::vector<double> pixel_utilities;  // one per evaluated scene
  double pixel_utility_mean = 0.0;
  double pixel_utility_median = 0.0;
  std::size_t foreground_classes = 0;
  std::vector<std::string> diagnostics;
};

// Scores each ground-truth object (objects ordered by id) against the
// predicted foreground classes in `mhat`. Pixel sets drive IoU, F1 and
// precision; the lifted pointmap points of those pixels drive Chamfer.
std::vector<ObjectMatchReport> match_objects(const std::vector<LabelMap>& mhat, const Scene& scene,
                                             std::vector<std::string>* diagnostics = nullptr,
                                             unsigned threads = 1);

// Foreground-predicted pixels over ground-truth foreground pixels. Raw
// ratio; a value above 1 is reported with a diagnostic.
double pixel_utility(const std::vector<LabelMap>& mhat, const std::vector<LabelMap>& ground_truth,
                     std::vector<std::string>* diagnostics = nullptr);

MetricsReport evaluate(const std::vector<LabelMap>& mhat, const Scene& scene, unsigned threads = 1);

// Merges per-scene reports: per-object means over all objects, pixel
// utility mean and median over scenes.
MetricsReport combine(const std::vector<MetricsReport>& reports);

nlohmann::ordered_json to_json(const MetricsReport& report);

}  // namespace maskfuse::metrics
