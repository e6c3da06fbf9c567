#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "maskfuse/contraction.hpp"
#include "maskfuse/kdtree.hpp"
#include "maskfuse/match2d.hpp"
#include "maskfuse/scene.hpp"

namespace maskfuse {

struct PointSource {
  ImageIndex image = 0;
  Pixel pixel;
  friend auto operator<=>(const PointSource&, const PointSource&) = default;
};

// 3D points of one supervertex with per-point provenance.
struct SuperVertexCloud {
  VertexId id = 0;
  std::vector<Eigen::Vector3d> points;
  std::vector<PointSource> source;

  // An empty cloud takes no part in 3D edge construction.
  bool empty() const { return points.empty(); }
};

struct Lift3dConfig {
  double tau3d = 5e-4;  // squared meters; <= 0 disables the 3D stage
  double min_point_confidence = 0.5;
  std::size_t max_cloud_points = 50000;
};

// Union over member masks of the pointmap entries at their (foreground)
// pixels with confidence >= min_point_conf. Members are visited in vertex
// order and pixels in row-major order.
std::map<VertexId, SuperVertexCloud> supervertex_clouds(const Partition& partition, const MaskTable& masks,
                                                        const Scene& scene, double min_point_conf);

// (1/|X|) sum_x min_y |x - y|^2. Throws Error if either cloud is empty.
double directed_chamfer(std::span<const Eigen::Vector3d> from, std::span<const Eigen::Vector3d> to);
double directed_chamfer(std::span<const Eigen::Vector3d> from, const KdTree& to_index);

// True iff directed_chamfer(from, to) <= tau. Stops as soon as the partial
// sum rules the pair out.
bool directed_chamfer_within(std::span<const Eigen::Vector3d> from, const KdTree& to_index, double tau);

// Uniform sample of at most `max_points` points, input order preserved.
std::vector<Eigen::Vector3d> cap_cloud(const std::vector<Eigen::Vector3d>& points, std::size_t max_points,
                                       std::uint64_t seed);

struct Graph3dStats {
  std::size_t empty_clouds = 0;
  std::size_t pairs_total = 0;
  std::size_t pairs_pruned = 0;
};

// Vertices: supervertices with non-empty clouds. Edge (u, v) iff either
// directed distance is <= tau3d. Pairs whose bounding boxes are farther
// apart than sqrt(tau3d) are skipped without index queries.
MaskGraph build_3d_graph(const std::map<VertexId, SuperVertexCloud>& clouds, const Lift3dConfig& config,
                         std::uint64_t seed, unsigned threads = 1, Graph3dStats* stats = nullptr);

struct RefineResult {
  Partition partition;  // mask-level
  MaskGraph graph3d;
  Graph3dStats stats;
};

// Lifts partition_2d's supervertices, builds and contracts G_3D, and
// composes the result with partition_2d.
RefineResult refine(const Partition& partition_2d, const MaskTable& masks, const Scene& scene,
                    const Lift3dConfig& config, std::uint64_t seed, unsigned threads = 1);

}  // namespace maskfuse
