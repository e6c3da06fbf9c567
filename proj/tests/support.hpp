#pragma once

#include <algorithm>
#include <atomic>
#include <filesystem>
#include <limits>
#include <map>
#include <numeric>
#include <set>
#include <string>
#include <vector>

#include <unistd.h>

#include <Eigen/Core>

#include "maskfuse/contraction.hpp"
#include "maskfuse/random.hpp"
#include "maskfuse/scene.hpp"

namespace testsupport {

namespace fs = std::filesystem;

// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag = "t") {
    static std::atomic<unsigned> counter{0};
    path_ = fs::temp_directory_path() /
            ("maskfuse_" + tag + "_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    fs::remove_all(path_);
    fs::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    fs::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const fs::path& path() const { return path_; }
  fs::path operator/(const std::string& name) const { return path_ / name; }

 private:
  fs::path path_;
};

// Textbook union-find with path halving and union by size.
class UnionFind {
 public:
  explicit UnionFind(std::size_t n) : parent_(n), size_(n, 1) { std::iota(parent_.begin(), parent_.end(), 0); }
  std::size_t find(std::size_t x) {
    while (parent_[x] != x) {
      parent_[x] = parent_[parent_[x]];
      x = parent_[x];
    }
    return x;
  }
  void unite(std::size_t a, std::size_t b) {
    a = find(a);
    b = find(b);
    if (a == b) return;
    if (size_[a] < size_[b]) std::swap(a, b);
    parent_[b] = a;
    size_[a] += size_[b];
  }

 private:
  std::vector<std::size_t> parent_;
  std::vector<std::size_t> size_;
};

// Connected components of `graph` as a set of sorted member lists.
inline std::set<std::vector<maskfuse::VertexId>> components(const maskfuse::MaskGraph& graph) {
  const auto& vs = graph.vertices();
  std::map<maskfuse::VertexId, std::size_t> pos;
  for (std::size_t i = 0; i < vs.size(); ++i) pos[vs[i]] = i;
  UnionFind uf(vs.size());
  for (const auto& [u, v] : graph.edges()) uf.unite(pos[u], pos[v]);
  std::map<std::size_t, std::vector<maskfuse::VertexId>> groups;
  for (std::size_t i = 0; i < vs.size(); ++i) groups[uf.find(i)].push_back(vs[i]);
  std::set<std::vector<maskfuse::VertexId>> out;
  for (auto& [_, g] : groups) out.insert(g);
  return out;
}

inline std::set<std::vector<maskfuse::VertexId>> member_sets(const maskfuse::Partition& p) {
  std::set<std::vector<maskfuse::VertexId>> out;
  for (const auto& [_, m] : p.members()) out.insert(m);
  return out;
}

// Erdos-Renyi graph over ids 0..n-1 (optionally offset/spread).
inline maskfuse::MaskGraph random_graph(std::size_t n, double p, std::uint64_t seed, maskfuse::VertexId stride = 1) {
  maskfuse::Rng rng(seed);
  std::vector<maskfuse::VertexId> vs(n);
  for (std::size_t i = 0; i < n; ++i) vs[i] = static_cast<maskfuse::VertexId>(i * stride);
  std::vector<std::pair<maskfuse::VertexId, maskfuse::VertexId>> es;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j)
      if (rng.uniform() < p) es.emplace_back(vs[i], vs[j]);
  return maskfuse::MaskGraph(vs, es);
}

// O(|X| |Y|) mean of squared nearest distances.
inline double brute_directed_chamfer(const std::vector<Eigen::Vector3d>& x, const std::vector<Eigen::Vector3d>& y) {
  double sum = 0.0;
  for (const auto& p : x) {
    double best = std::numeric_limits<double>::infinity();
    for (const auto& q : y) best = std::min(best, (p - q).squaredNorm());
    sum += best;
  }
  return sum / static_cast<double>(x.size());
}

inline std::vector<Eigen::Vector3d> random_cloud(std::size_t n, std::uint64_t seed, double scale = 1.0) {
  maskfuse::Rng rng(seed);
  std::vector<Eigen::Vector3d> pts(n);
  for (auto& p : pts) p = Eigen::Vector3d(rng.uniform(-scale, scale), rng.uniform(-scale, scale), rng.uniform(-scale, scale));
  return pts;
}

// Scene of `n` images of size w x h, identity poses, zero points with
// confidence 1 and all-zero label maps.
inline maskfuse::Scene blank_scene(std::size_t n, int w, int h) {
  maskfuse::Scene s;
  for (std::size_t i = 0; i < n; ++i) {
    maskfuse::ImageMeta m;
    m.index = static_cast<maskfuse::ImageIndex>(i);
    m.width = w;
    m.height = h;
    s.images.push_back(m);
    s.label_maps.emplace_back(w, h);
    maskfuse::PointMap pm(w, h);
    std::fill(pm.confidence.begin(), pm.confidence.end(), 1.0f);
    s.pointmaps.push_back(pm);
  }
  return s;
}

}  // namespace testsupport
