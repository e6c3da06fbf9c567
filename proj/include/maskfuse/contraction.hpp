#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <utility>
#include <vector>

namespace maskfuse {

using VertexId = std::uint32_t;

// Undirected simple graph over opaque vertex ids.
class MaskGraph {
 public:
  MaskGraph() = default;
  // Edges are canonicalized (smaller id first), sorted and de-duplicated.
  // Throws Error on self-loops, unknown endpoints or duplicate vertices.
  MaskGraph(std::vector<VertexId> vertices, std::vector<std::pair<VertexId, VertexId>> edges);

  const std::vector<VertexId>& vertices() const { return vertices_; }  // sorted ascending
  const std::vector<std::pair<VertexId, VertexId>>& edges() const { return edges_; }
  bool has_edge(VertexId u, VertexId v) const;
  std::size_t vertex_count() const { return vertices_.size(); }
  std::size_t edge_count() const { return edges_.size(); }

 private:
  std::vector<VertexId> vertices_;
  std::vector<std::pair<VertexId, VertexId>> edges_;
};

// Map from vertices onto supervertices. Supervertex ids are the minimum
// member id, and member sets partition the vertex set.
class Partition {
 public:
  Partition() = default;
  static Partition identity(const std::vector<VertexId>& vertices);
  // Groups vertices by an arbitrary root map and canonicalizes ids.
  static Partition from_roots(const std::map<VertexId, VertexId>& root_of);

  VertexId supervertex_of(VertexId v) const;  // throws Error if v is unknown
  bool contains(VertexId v) const { return assignment_.count(v) != 0; }
  const std::map<VertexId, VertexId>& assignment() const { return assignment_; }
  const std::map<VertexId, std::vector<VertexId>>& members() const { return members_; }
  std::vector<VertexId> supervertex_ids() const;
  std::size_t size() const { return members_.size(); }

  // {"supervertices": {"<id>": [member ids...]}}
  std::string to_json() const;

  friend bool operator==(const Partition&, const Partition&) = default;

 private:
  std::map<VertexId, VertexId> assignment_;
  std::map<VertexId, std::vector<VertexId>> members_;
};

// Per-vertex labels in [0, 1). Each label is a pure function of
// (seed, round, vertex id).
struct LabelAssignment {
  std::uint64_t seed = 0;
  std::uint32_t round = 0;
  std::map<VertexId, double> labels;
};

double vertex_label(std::uint64_t seed, std::uint32_t round, VertexId v);
LabelAssignment assign_labels(const std::vector<VertexId>& vertices, std::uint64_t seed, std::uint32_t round = 0);

struct StarRound {
  // Every input vertex mapped to the star center it joins (centers map to themselves).
  std::map<VertexId, VertexId> center_of;
  // Vertices are the centers; edges are the surviving inter-star edges.
  MaskGraph contracted;
};

// One round of randomized star contraction. A vertex is a center when its
// (label, id) pair is minimal over its closed neighborhood; every other
// vertex follows argmin pointers, which strictly decrease the label, down
// to a center.
StarRound star_round(const MaskGraph& graph, const LabelAssignment& labels, unsigned threads = 1);

struct ContractionStats {
  std::uint32_t rounds = 0;
};

// Repeats star rounds with fresh labels until no edge remains. The result
// is the connected-component partition of `graph`.
Partition contract(const MaskGraph& graph, std::uint64_t seed, unsigned threads = 1,
                   ContractionStats* stats = nullptr);

// outer ∘ inner. `outer` must be defined exactly on inner's supervertex ids.
Partition compose(const Partition& inner, const Partition& outer);

}  // namespace maskfuse
