#pragma once

#include <cstdint>
#include <limits>
#include <span>
#include <vector>

#include <Eigen/Core>

namespace maskfuse {

// Exact nearest-neighbor index over a fixed 3D point set. The tree keeps a
// copy of the points, reordered so every node owns a contiguous range.
class KdTree {
 public:
  struct Neighbor {
    std::size_t index = 0;  // into the original point order
    double squared_distance = std::numeric_limits<double>::infinity();
  };

  KdTree() = default;
  explicit KdTree(std::span<const Eigen::Vector3d> points, std::size_t leaf_size = 12);

  std::size_t size() const { return points_.size(); }
  bool empty() const { return points_.empty(); }
  Neighbor nearest(const Eigen::Vector3d& query) const;

 private:
  struct Node {
    std::uint32_t begin = 0;
    std::uint32_t end = 0;
    std::int32_t left = -1;  // -1 marks a leaf
    std::int32_t right = -1;
    std::uint8_t axis = 0;
    double split = 0.0;
  };

  std::int32_t build(std::uint32_t begin, std::uint32_t end);
  void search(std::int32_t node, const Eigen::Vector3d& q, Neighbor& best) const;

  std::vector<Eigen::Vector3d> points_;
  std::vector<std::uint32_t> original_;
  std::vector<Node> nodes_;
  std::size_t leaf_size_ = 12;
};

}  // namespace maskfuse
