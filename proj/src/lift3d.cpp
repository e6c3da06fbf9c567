#include "maskfuse/lift3d.hpp"

#include <algorithm>
#include <numeric>

#include "maskfuse/error.hpp"
#include "maskfuse/parallel.hpp"
#include "maskfuse/random.hpp"

namespace maskfuse {

std::map<VertexId, SuperVertexCloud> supervertex_clouds(const Partition& partition, const MaskTable& masks,
                                                        const Scene& scene, double min_point_conf) {
  std::map<VertexId, SuperVertexCloud> clouds;
  for (const auto& [id, members] : partition.members()) {
    SuperVertexCloud& cloud = clouds[id];
    cloud.id = id;
    for (VertexId v : members) {
      if (v >= masks.size()) throw Error("partition vertex " + std::to_string(v) + " is not a known mask");
      const ImageIndex image = masks.refs[v].image;
      const PointMap& pm = scene.pointmaps.at(image);
      for (const Pixel& px : masks.pixels[v]) {
        const std::size_t k = pm.index(px.x, px.y);
        if (pm.confidence[k] < min_point_conf) continue;
        cloud.points.push_back(pm.points[k].cast<double>());
        cloud.source.push_back({image, px});
      }
    }
  }
  return clouds;
}

double directed_chamfer(std::span<const Eigen::Vector3d> from, const KdTree& to_index) {
  if (from.empty() || to_index.empty()) throw Error("directed Chamfer distance of an empty cloud");
  double sum = 0.0;
  for (const auto& x : from) sum += to_index.nearest(x).squared_distance;
  return sum / static_cast<double>(from.size());
}

double directed_chamfer(std::span<const Eigen::Vector3d> from, std::span<const Eigen::Vector3d> to) {
  if (from.empty() || to.empty()) throw Error("directed Chamfer distance of an empty cloud");
  return directed_chamfer(from, KdTree(to));
}

bool directed_chamfer_within(std::span<const Eigen::Vector3d> from, const KdTree& to_index, double tau) {
  if (from.empty() || to_index.empty()) throw Error("directed Chamfer distance of an empty cloud");
  const double budget = tau * static_cast<double>(from.size());
  double sum = 0.0;
  for (const auto& x : from) {
    sum += to_index.nearest(x).squared_distance;
    if (sum > budget) return false;
  }
  return sum / static_cast<double>(from.size()) <= tau;
}

std::vector<Eigen::Vector3d> cap_cloud(const std::vector<Eigen::Vector3d>& points, std::size_t max_points,
                                       std::uint64_t seed) {
  if (points.size() <= max_points) return points;
  std::vector<std::uint32_t> index(points.size());
  std::iota(index.begin(), index.end(), 0u);
  Rng rng(seed);
  for (std::size_t i = 0; i < max_points; ++i) std::swap(index[i], index[i + rng.below(points.size() - i)]);
  index.resize(max_points);
  std::sort(index.begin(), index.end());
  std::vector<Eigen::Vector3d> out;
  out.reserve(max_points);
  for (auto i : index) out.push_back(points[i]);
  return out;
}

namespace {

struct Box {
  Eigen::Vector3d lo;
  Eigen::Vector3d hi;
};

Box bounds(const std::vector<Eigen::Vector3d>& pts) {
  Box b{pts.front(), pts.front()};
  for (const auto& p : pts) {
    b.lo = b.lo.cwiseMin(p);
    b.hi = b.hi.cwiseMax(p);
  }
  return b;
}

// Lower bound on |x - y|^2 for any x in a, y in b.
double squared_gap(const Box& a, const Box& b) {
  double g = 0.0;
  for (int k = 0; k < 3; ++k) {
    const double d = std::max({0.0, a.lo[k] - b.hi[k], b.lo[k] - a.hi[k]});
    g += d * d;
  }
  return g;
}

}  // namespace

MaskGraph build_3d_graph(const std::map<VertexId, SuperVertexCloud>& clouds, const Lift3dConfig& config,
                         std::uint64_t seed, unsigned threads, Graph3dStats* stats) {
  Graph3dStats local;
  std::vector<VertexId> ids;
  std::vector<const SuperVertexCloud*> sources;
  for (const auto& [id, cloud] : clouds) {
    if (cloud.empty()) {
      ++local.empty_clouds;
      continue;
    }
    ids.push_back(id);
    sources.push_back(&cloud);
  }
  const std::size_t n = ids.size();
  std::vector<std::pair<VertexId, VertexId>> edges;

  if (config.tau3d > 0.0 && n > 1) {
    std::vector<std::vector<Eigen::Vector3d>> capped(n);
    std::vector<KdTree> index(n);
    std::vector<Box> box(n);
    const std::uint64_t cap_seed = stream_seed(seed, Stream::kCloudSubsample);
    parallel_for(n, threads, [&](std::size_t i) {
      capped[i] = cap_cloud(sources[i]->points, config.max_cloud_points, hash_key({cap_seed, ids[i]}));
      index[i] = KdTree(capped[i]);
      box[i] = bounds(capped[i]);
    });

    std::vector<std::pair<std::uint32_t, std::uint32_t>> pairs;
    for (std::uint32_t i = 0; i < n; ++i) {
      for (std::uint32_t j = i + 1; j < n; ++j) {
        ++local.pairs_total;
        // Every term of the mean is at least the squared box gap.
        if (squared_gap(box[i], box[j]) > config.tau3d) {
          ++local.pairs_pruned;
          continue;
        }
        pairs.emplace_back(i, j);
      }
    }
    std::vector<std::uint8_t> linked(pairs.size(), 0);
    parallel_for(pairs.size(), threads, [&](std::size_t k) {
      const auto [i, j] = pairs[k];
      linked[k] = directed_chamfer_within(capped[i], index[j], config.tau3d) ||
                  directed_chamfer_within(capped[j], index[i], config.tau3d);
    });
    for (std::size_t k = 0; k < pairs.size(); ++k)
      if (linked[k]) edges.emplace_back(ids[pairs[k].first], ids[pairs[k].second]);
  } else {
    local.pairs_total = n * (n - (n > 0 ? 1 : 0)) / 2;
  }
  if (stats) *stats = local;
  return MaskGraph(std::move(ids), std::move(edges));
}

RefineResult refine(const Partition& partition_2d, const MaskTable& masks, const Scene& scene,
                    const Lift3dConfig& config, std::uint64_t seed, unsigned threads) {
  RefineResult out;
  const auto clouds = supervertex_clouds(partition_2d, masks, scene, config.min_point_confidence);
  out.graph3d = build_3d_graph(clouds, config, seed, threads, &out.stats);
  const Partition contracted = contract(out.graph3d, stream_seed(seed, Stream::kContraction3d), threads);

  // Supervertices left out of G_3D (empty clouds) stay as singletons.
  std::map<VertexId, VertexId> roots;
  for (VertexId sv : partition_2d.supervertex_ids())
    roots[sv] = contracted.contains(sv) ? contracted.supervertex_of(sv) : sv;
  out.partition = compose(partition_2d, Partition::from_roots(roots));
  return out;
}

}  // namespace maskfuse
