#include "maskfuse/contraction.hpp"

#include <algorithm>
#include <tuple>

#include <json.hpp>

#include "maskfuse/error.hpp"
#include "maskfuse/parallel.hpp"
#include "maskfuse/random.hpp"

namespace maskfuse {

MaskGraph::MaskGraph(std::vector<VertexId> vertices, std::vector<std::pair<VertexId, VertexId>> edges)
    : vertices_(std::move(vertices)), edges_(std::move(edges)) {
  std::sort(vertices_.begin(), vertices_.end());
  if (std::adjacent_find(vertices_.begin(), vertices_.end()) != vertices_.end())
    throw Error("graph has duplicate vertex ids");
  for (auto& [u, v] : edges_) {
    if (u == v) throw Error("graph has a self-loop at vertex " + std::to_string(u));
    if (u > v) std::swap(u, v);
    if (!std::binary_search(vertices_.begin(), vertices_.end(), u) ||
        !std::binary_search(vertices_.begin(), vertices_.end(), v))
      throw Error("graph edge references an unknown vertex");
  }
  std::sort(edges_.begin(), edges_.end());
  edges_.erase(std::unique(edges_.begin(), edges_.end()), edges_.end());
}

bool MaskGraph::has_edge(VertexId u, VertexId v) const {
  if (u > v) std::swap(u, v);
  return std::binary_search(edges_.begin(), edges_.end(), std::make_pair(u, v));
}

Partition Partition::identity(const std::vector<VertexId>& vertices) {
  std::map<VertexId, VertexId> roots;
  for (VertexId v : vertices) roots[v] = v;
  return from_roots(roots);
}

Partition Partition::from_roots(const std::map<VertexId, VertexId>& root_of) {
  std::map<VertexId, std::vector<VertexId>> groups;
  for (const auto& [v, root] : root_of) groups[root].push_back(v);
  Partition p;
  for (auto& [root, group] : groups) {
    // std::map iteration order keeps each group sorted; front() is the minimum.
    const VertexId id = group.front();
    for (VertexId v : group) p.assignment_[v] = id;
    p.members_[id] = std::move(group);
  }
  return p;
}

VertexId Partition::supervertex_of(VertexId v) const {
  const auto it = assignment_.find(v);
  if (it == assignment_.end()) throw Error("vertex " + std::to_string(v) + " is not in the partition");
  return it->second;
}

std::vector<VertexId> Partition::supervertex_ids() const {
  std::vector<VertexId> ids;
  ids.reserve(members_.size());
  for (const auto& [id, _] : members_) ids.push_back(id);
  return ids;
}

std::string Partition::to_json() const {
  nlohmann::ordered_json sv = nlohmann::ordered_json::object();
  for (const auto& [id, group] : members_) sv[std::to_string(id)] = group;
  nlohmann::ordered_json doc;
  doc["supervertices"] = std::move(sv);
  return doc.dump();
}

double vertex_label(std::uint64_t seed, std::uint32_t round, VertexId v) {
  return unit_interval(hash_key({seed, round, v}));
}

LabelAssignment assign_labels(const std::vector<VertexId>& vertices, std::uint64_t seed, std::uint32_t round) {
  LabelAssignment out;
  out.seed = seed;
  out.round = round;
  for (VertexId v : vertices) out.labels[v] = vertex_label(seed, round, v);
  return out;
}

namespace {

// Graph over dense indices 0..n-1; `ids` maps back to vertex ids.
struct DenseGraph {
  std::vector<VertexId> ids;
  std::vector<std::pair<std::uint32_t, std::uint32_t>> edges;
};

DenseGraph densify(const MaskGraph& g) {
  DenseGraph d;
  d.ids = g.vertices();
  d.edges.reserve(g.edge_count());
  auto index_of = [&](VertexId v) {
    return static_cast<std::uint32_t>(std::lower_bound(d.ids.begin(), d.ids.end(), v) - d.ids.begin());
  };
  for (const auto& [u, v] : g.edges()) d.edges.emplace_back(index_of(u), index_of(v));
  return d;
}

struct DenseRound {
  std::vector<std::uint32_t> center;  // per input vertex: index of its center in the input
  DenseGraph contracted;
  std::vector<std::uint32_t> new_index;  // per input vertex: index of its center in `contracted`
};

DenseRound dense_star_round(const DenseGraph& g, const std::vector<double>& labels, unsigned threads) {
  const std::size_t n = g.ids.size();

  // CSR adjacency.
  std::vector<std::uint32_t> offset(n + 1, 0);
  for (const auto& [u, v] : g.edges) {
    ++offset[u + 1];
    ++offset[v + 1];
  }
  for (std::size_t i = 0; i < n; ++i) offset[i + 1] += offset[i];
  std::vector<std::uint32_t> adjacency(offset[n]);
  {
    std::vector<std::uint32_t> fill(offset.begin(), offset.end() - 1);
    for (const auto& [u, v] : g.edges) {
      adjacency[fill[u]++] = v;
      adjacency[fill[v]++] = u;
    }
  }

  // (label, id) lexicographic order makes the minimum unique even when labels tie.
  auto less = [&](std::uint32_t a, std::uint32_t b) {
    return std::tie(labels[a], g.ids[a]) < std::tie(labels[b], g.ids[b]);
  };

  std::vector<std::uint32_t> parent(n);
  parallel_for(n, threads, [&](std::size_t v) {
    std::uint32_t best = static_cast<std::uint32_t>(v);
    for (std::uint32_t k = offset[v]; k < offset[v + 1]; ++k)
      if (less(adjacency[k], best)) best = adjacency[k];
    parent[v] = best;
  });

  DenseRound out;
  out.center.resize(n);
  parallel_for(n, threads, [&](std::size_t v) {
    std::uint32_t c = static_cast<std::uint32_t>(v);
    while (parent[c] != c) c = parent[c];
    out.center[v] = c;
  });

  out.new_index.assign(n, 0);
  std::vector<std::uint32_t> center_slot(n, 0);
  for (std::size_t v = 0; v < n; ++v) {
    if (out.center[v] == v) {
      center_slot[v] = static_cast<std::uint32_t>(out.contracted.ids.size());
      out.contracted.ids.push_back(g.ids[v]);
    }
  }
  for (std::size_t v = 0; v < n; ++v) out.new_index[v] = center_slot[out.center[v]];

  auto& edges = out.contracted.edges;
  for (const auto& [u, v] : g.edges) {
    std::uint32_t a = out.new_index[u];
    std::uint32_t b = out.new_index[v];
    if (a == b) continue;
    if (a > b) std::swap(a, b);
    edges.emplace_back(a, b);
  }
  std::sort(edges.begin(), edges.end());
  edges.erase(std::unique(edges.begin(), edges.end()), edges.end());
  return out;
}

}  // namespace

StarRound star_round(const MaskGraph& graph, const LabelAssignment& labels, unsigned threads) {
  const DenseGraph dense = densify(graph);
  std::vector<double> dense_labels(dense.ids.size());
  for (std::size_t i = 0; i < dense.ids.size(); ++i) {
    const auto it = labels.labels.find(dense.ids[i]);
    if (it == labels.labels.end()) throw Error("label assignment does not cover vertex " + std::to_string(dense.ids[i]));
    dense_labels[i] = it->second;
  }
  const DenseRound round = dense_star_round(dense, dense_labels, threads);

  StarRound out;
  for (std::size_t i = 0; i < dense.ids.size(); ++i) out.center_of[dense.ids[i]] = dense.ids[round.center[i]];
  std::vector<std::pair<VertexId, VertexId>> edges;
  edges.reserve(round.contracted.edges.size());
  for (const auto& [a, b] : round.contracted.edges)
    edges.emplace_back(round.contracted.ids[a], round.contracted.ids[b]);
  out.contracted = MaskGraph(round.contracted.ids, std::move(edges));
  return out;
}

Partition contract(const MaskGraph& graph, std::uint64_t seed, unsigned threads, ContractionStats* stats) {
  DenseGraph current = densify(graph);
  const std::size_t n = current.ids.size();
  // Index of each original vertex's supervertex in `current`.
  std::vector<std::uint32_t> owner(n);
  for (std::size_t i = 0; i < n; ++i) owner[i] = static_cast<std::uint32_t>(i);

  std::uint32_t round = 0;
  while (!current.edges.empty()) {
    std::vector<double> labels(current.ids.size());
    for (std::size_t i = 0; i < labels.size(); ++i) labels[i] = vertex_label(seed, round, current.ids[i]);
    DenseRound step = dense_star_round(current, labels, threads);
    ensure(step.contracted.ids.size() < current.ids.size(), "star round made no progress on a graph with edges");
    for (auto& o : owner) o = step.new_index[o];
    current = std::move(step.contracted);
    ++round;
  }
  if (stats) stats->rounds = round;

  std::map<VertexId, VertexId> roots;
  for (std::size_t i = 0; i < n; ++i) roots[graph.vertices()[i]] = current.ids[owner[i]];
  return Partition::from_roots(roots);
}

Partition compose(const Partition& inner, const Partition& outer) {
  const auto inner_ids = inner.supervertex_ids();
  std::vector<VertexId> outer_vertices;
  outer_vertices.reserve(outer.assignment().size());
  for (const auto& [v, _] : outer.assignment()) outer_vertices.push_back(v);
  if (inner_ids != outer_vertices) throw Error("compose: outer partition is not defined on inner's supervertices");

  std::map<VertexId, VertexId> roots;
  for (const auto& [v, sv] : inner.assignment()) roots[v] = outer.supervertex_of(sv);
  return Partition::from_roots(roots);
}

}  // namespace maskfuse
