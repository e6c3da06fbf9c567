#include "maskfuse/kdtree.hpp"

#include <algorithm>
#include <numeric>

#include "maskfuse/error.hpp"

namespace maskfuse {

KdTree::KdTree(std::span<const Eigen::Vector3d> points, std::size_t leaf_size)
    : points_(points.begin(), points.end()), original_(points.size()), leaf_size_(std::max<std::size_t>(1, leaf_size)) {
  if (points.size() > std::numeric_limits<std::uint32_t>::max()) throw Error("point set too large for index");
  std::iota(original_.begin(), original_.end(), 0u);
  if (!points_.empty()) {
    nodes_.reserve(2 * points_.size() / leaf_size_ + 1);
    build(0, static_cast<std::uint32_t>(points_.size()));
  }
}

std::int32_t KdTree::build(std::uint32_t begin, std::uint32_t end) {
  const auto id = static_cast<std::int32_t>(nodes_.size());
  nodes_.push_back({begin, end, -1, -1, 0, 0.0});
  if (end - begin <= leaf_size_) return id;

  Eigen::Vector3d lo = points_[begin];
  Eigen::Vector3d hi = points_[begin];
  for (std::uint32_t i = begin + 1; i < end; ++i) {
    lo = lo.cwiseMin(points_[i]);
    hi = hi.cwiseMax(points_[i]);
  }
  Eigen::Index axis = 0;
  (hi - lo).maxCoeff(&axis);
  if (hi[axis] == lo[axis]) return id;  // all points coincide

  // Sort a permutation so points_ and original_ move together.
  const std::uint32_t mid = begin + (end - begin) / 2;
  std::vector<std::uint32_t> order(end - begin);
  std::iota(order.begin(), order.end(), begin);
  std::nth_element(order.begin(), order.begin() + (mid - begin), order.end(),
                   [&](std::uint32_t a, std::uint32_t b) { return points_[a][axis] < points_[b][axis]; });
  std::vector<Eigen::Vector3d> tmp_points(order.size());
  std::vector<std::uint32_t> tmp_original(order.size());
  for (std::size_t k = 0; k < order.size(); ++k) {
    tmp_points[k] = points_[order[k]];
    tmp_original[k] = original_[order[k]];
  }
  std::copy(tmp_points.begin(), tmp_points.end(), points_.begin() + begin);
  std::copy(tmp_original.begin(), tmp_original.end(), original_.begin() + begin);

  const double split = points_[mid][axis];
  const std::int32_t left = build(begin, mid);
  const std::int32_t right = build(mid, end);
  Node& node = nodes_[static_cast<std::size_t>(id)];
  node.axis = static_cast<std::uint8_t>(axis);
  node.split = split;
  node.left = left;
  node.right = right;
  return id;
}

KdTree::Neighbor KdTree::nearest(const Eigen::Vector3d& query) const {
  if (points_.empty()) throw Error("nearest-neighbor query on an empty index");
  Neighbor best;
  search(0, query, best);
  best.index = original_[best.index];
  return best;
}

// Left subtree holds coordinates <= split, right holds >= split.
void KdTree::search(std::int32_t id, const Eigen::Vector3d& q, Neighbor& best) const {
  const Node& node = nodes_[static_cast<std::size_t>(id)];
  if (node.left < 0) {
    for (std::uint32_t i = node.begin; i < node.end; ++i) {
      const double d = (q - points_[i]).squaredNorm();
      if (d < best.squared_distance || (d == best.squared_distance && original_[i] < original_[best.index])) {
        best.squared_distance = d;
        best.index = i;
      }
    }
    return;
  }
  const double diff = q[node.axis] - node.split;
  const std::int32_t near = diff <= 0.0 ? node.left : node.right;
  const std::int32_t far = diff <= 0.0 ? node.right : node.left;
  search(near, q, best);
  if (diff * diff <= best.squared_distance) search(far, q, best);
}

}  // namespace maskfuse
